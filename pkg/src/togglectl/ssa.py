"""Gillespie direct-method SSA for single cells and populations.

Protein and mRNA copy numbers are discrete. Intracellular inducers are
deterministic and piecewise-exponential under piecewise-constant medium
inputs. Propensities that depend on the inducers are refreshed on a
bounded grid (``refresh`` minutes) and at every input edge; the inducer
level used over a refresh interval is its value at the interval midpoint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np
from numba import njit

from .integrate import EDGE_EPS, InputSchedule, Trajectory
from .model import ModelParams

TOGGLE_SPECIES = ("mrna_laci", "mrna_tetr", "laci", "tetr")
TOGGLE_REACTIONS = (
    "transcription_laci", "transcription_tetr",
    "mrna_decay_laci", "mrna_decay_tetr",
    "translation_laci", "translation_tetr",
    "protein_decay_laci", "protein_decay_tetr",
)

OK, STOPPED, BAD_PROPENSITY = 0, 1, 2


class SSAError(RuntimeError):
    pass


def toggle_coefficients(p: ModelParams, omega: float, atc: float, iptg: float) -> np.ndarray:
    """Propensity coefficients for the toggle network at fixed inducer levels."""
    return np.array([
        omega * p.k_m0_L, omega * p.k_m_L,
        1.0 / (omega * p.theta_TetR * (1.0 + (atc / p.theta_aTc) ** p.eta_aTc)), p.eta_TetR,
        omega * p.k_m0_T, omega * p.k_m_T,
        1.0 / (omega * p.theta_LacI * (1.0 + (iptg / p.theta_IPTG) ** p.eta_IPTG)), p.eta_LacI,
        p.g_m_L, p.g_m_T, p.k_p_L, p.k_p_T, p.g_p_L, p.g_p_T,
    ])


@njit(cache=True)
def toggle_propensity(x, c, out):
    out[0] = c[0] + c[1] / (1.0 + (x[3] * c[2]) ** c[3])
    out[1] = c[4] + c[5] / (1.0 + (x[2] * c[6]) ** c[7])
    out[2] = c[8] * x[0]
    out[3] = c[9] * x[1]
    out[4] = c[10] * x[0]
    out[5] = c[11] * x[1]
    out[6] = c[12] * x[2]
    out[7] = c[13] * x[3]


@njit(cache=True)
def toggle_propensity_sq(x, c, out):
    # same as toggle_propensity for Hill exponents equal to 2
    r = x[3] * c[2]
    out[0] = c[0] + c[1] / (1.0 + r * r)
    r = x[2] * c[6]
    out[1] = c[4] + c[5] / (1.0 + r * r)
    out[2] = c[8] * x[0]
    out[3] = c[9] * x[1]
    out[4] = c[10] * x[0]
    out[5] = c[11] * x[1]
    out[6] = c[12] * x[2]
    out[7] = c[13] * x[3]


@njit(cache=True)
def birth_death_propensity(x, c, out):
    out[0] = c[0]
    out[1] = c[1] * x[0]


@njit(cache=True)
def _direct_method(propensity, stoich, coef, x, t, t_end, rng, acc):
    """Advance ``x`` in place from t to t_end. ``acc`` accumulates the time integral of x.

    Returns (status, n_events).
    """
    n_r, n_s = stoich.shape
    a = np.empty(n_r)
    n = 0
    while True:
        propensity(x, coef, a)
        a0 = 0.0
        for j in range(n_r):
            if not (a[j] >= 0.0) or a[j] == np.inf:
                return BAD_PROPENSITY, n
            a0 += a[j]
        if a0 == 0.0:
            dt = t_end - t
        else:
            dt = -math.log(1.0 - rng.random()) / a0
        if t + dt >= t_end:
            for i in range(n_s):
                acc[i] += x[i] * (t_end - t)
            return OK, n
        for i in range(n_s):
            acc[i] += x[i] * dt
        t += dt
        q = rng.random() * a0
        j = 0
        c = a[0]
        while c < q and j < n_r - 1:
            j += 1
            c += a[j]
        for i in range(n_s):
            x[i] += stoich[j, i]
        n += 1


@dataclass(frozen=True)
class ReactionNetwork:
    """Species, integer stoichiometry and a jitted propensity ``f(x, coef, out)``.

    ``coefficients(atc, iptg)`` returns the coefficient vector for given
    intracellular inducer levels; it is re-evaluated at every refresh.
    """

    species: tuple[str, ...]
    reactions: tuple[str, ...]
    stoich: np.ndarray          # (n_reactions, n_species), int64
    propensity: object
    coefficients: Callable[[float, float], np.ndarray]
    omega: float = 1.0

    def propensities(self, x, atc: float = 0.0, iptg: float = 0.0) -> np.ndarray:
        out = np.empty(len(self.reactions))
        self.propensity(np.asarray(x, dtype=np.int64), self.coefficients(atc, iptg), out)
        return out


def build_network(p: ModelParams, omega: float = 1.0) -> ReactionNetwork:
    """Eight-reaction toggle network whose propensities are Omega times the ODE rate terms."""
    if not omega > 0:
        raise ValueError(f"omega must be > 0, got {omega}")
    S = np.zeros((8, 4), dtype=np.int64)
    S[0, 0] = S[1, 1] = 1
    S[2, 0] = S[3, 1] = -1
    S[4, 2] = S[5, 3] = 1
    S[6, 2] = S[7, 3] = -1
    prop = toggle_propensity_sq if p.eta_LacI == p.eta_TetR == 2.0 else toggle_propensity
    return ReactionNetwork(TOGGLE_SPECIES, TOGGLE_REACTIONS, S, prop,
                           partial(toggle_coefficients, p, float(omega)), float(omega))


def birth_death_network(k: float, g: float) -> ReactionNetwork:
    S = np.array([[1], [-1]], dtype=np.int64)
    coef = np.array([k, g], dtype=float)
    return ReactionNetwork(("n",), ("birth", "death"), S, birth_death_propensity,
                           lambda atc, iptg: coef, 1.0)


@dataclass
class InducerTrack:
    """Intracellular inducer levels driven by a medium schedule.

    ``mode`` is "dynamic" (asymmetric first-order exchange, solved exactly
    per constant-input segment) or "instantaneous" (inside = medium).
    """

    p: ModelParams
    atc: float = 0.0
    iptg: float = 0.0
    mode: str = "dynamic"

    def _relax(self, c, u, k_in, k_out, dt):
        k = k_in if u > c else k_out
        return u + (c - u) * math.exp(-k * dt)

    def advance(self, u_atc: float, u_iptg: float, dt: float) -> tuple[float, float]:
        """Step ``dt`` minutes under constant medium; returns the midpoint levels."""
        if self.mode == "instantaneous":
            self.atc, self.iptg = u_atc, u_iptg
            return u_atc, u_iptg
        p = self.p
        mid = (self._relax(self.atc, u_atc, p.k_in_aTc, p.k_out_aTc, 0.5 * dt),
               self._relax(self.iptg, u_iptg, p.k_in_IPTG, p.k_out_IPTG, 0.5 * dt))
        self.atc = self._relax(self.atc, u_atc, p.k_in_aTc, p.k_out_aTc, dt)
        self.iptg = self._relax(self.iptg, u_iptg, p.k_in_IPTG, p.k_out_IPTG, dt)
        return mid


@dataclass
class SSAResult:
    trajectory: Trajectory
    n_events: int
    time_integral: np.ndarray


def _boundaries(t0, t1, edges, step):
    n = int(math.floor((t1 - t0) / step + EDGE_EPS))
    grid = [t0 + i * step for i in range(n + 1)]
    pts = sorted(set(grid) | set(edges) | {t1})
    out = [pts[0]]
    for v in pts[1:]:
        if v - out[-1] > EDGE_EPS:
            out.append(v)
    return out


def ssa_run(net: ReactionNetwork, init, t0: float, t1: float, inputs: InputSchedule,
            rng: np.random.Generator, inducers: InducerTrack | None = None,
            refresh: float = 1.0, sample_dt: float = 1.0) -> SSAResult:
    """Exact SSA between refresh points, with inducer levels frozen per refresh interval.

    Recorded state columns are the species in concentration units
    (copies / omega) followed by intracellular aTc and IPTG.
    """
    if not t1 > t0:
        raise ValueError(f"need t1 > t0, got [{t0}, {t1}]")
    x = np.array(init, dtype=np.int64)
    if inducers is None:
        inducers = InducerTrack(ModelParams(), mode="instantaneous")
    edges = inputs.edges(t0, t1)
    bounds = _boundaries(t0, t1, edges, refresh)
    sample_at = set(_boundaries(t0, t1, edges, sample_dt))
    acc = np.zeros(len(net.species))
    n_total = 0
    ts, xs = [t0], [np.concatenate([x / net.omega, [inducers.atc, inducers.iptg]])]
    for a, b in zip(bounds[:-1], bounds[1:]):
        u_atc, u_iptg = inputs(0.5 * (a + b))
        atc, iptg = inducers.advance(u_atc, u_iptg, b - a)
        status, n = _direct_method(net.propensity, net.stoich, net.coefficients(atc, iptg),
                                   x, a, b, rng, acc)
        n_total += n
        if status != OK:
            raise SSAError(f"invalid propensity at t in [{a}, {b}], state {x.tolist()}, "
                           f"propensities {net.propensities(x, atc, iptg).tolist()}")
        if b in sample_at:
            ts.append(b)
            xs.append(np.concatenate([x / net.omega, [inducers.atc, inducers.iptg]]))
    t_arr = np.array(ts)
    u = np.array([inputs(t) for t in t_arr], dtype=float)
    d = np.array([inputs.duty(t) for t in t_arr], dtype=float)
    return SSAResult(Trajectory(t_arr, np.array(xs), u, d), n_total, acc)


def cell_rng(seed: int, cell_id: int) -> np.random.Generator:
    """Independent stream for one cell, fixed by (seed, cell_id)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(cell_id,))))


def copy_numbers(laci: float, tetr: float, p: ModelParams, omega: float) -> np.ndarray:
    """Rounded copy numbers with mRNAs at quasi-steady state for the given proteins."""
    m_l = laci * p.g_p_L / p.k_p_L
    m_t = tetr * p.g_p_T / p.k_p_T
    return np.rint(np.array([m_l, m_t, laci, tetr]) * omega).astype(np.int64)
