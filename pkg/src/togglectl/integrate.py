"""Deterministic integration under piecewise-constant (PWM) inputs."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np
from scipy.integrate import solve_ivp

from .model import ATC, IPTG, ModelParams, full_rhs, qss_rhs, reduce_params, hill_w1, hill_w2

EDGE_EPS = 1e-9


class IntegrationError(RuntimeError):
    def __init__(self, msg: str, t: float):
        super().__init__(f"{msg} (t = {t:.6g} min)")
        self.t = t


class InputSchedule(Protocol):
    def __call__(self, t: float) -> tuple[float, float]: ...

    def edges(self, t0: float, t1: float) -> list[float]: ...

    def duty(self, t: float) -> float: ...


@dataclass(frozen=True)
class ConstantInput:
    u_atc: float
    u_iptg: float

    def __call__(self, t):
        return self.u_atc, self.u_iptg

    def edges(self, t0, t1):
        return []

    def duty(self, t):
        return math.nan


@dataclass(frozen=True)
class PulseSchedule:
    """Mutually exclusive pulse pair, aTc first, with period origin ``t_start``."""

    amp_atc: float
    amp_iptg: float
    period_T: float
    duty_cycle: float
    t_start: float = 0.0

    def __call__(self, t):
        phase = ((t - self.t_start) % self.period_T) / self.period_T
        if phase < self.duty_cycle:
            return self.amp_atc, 0.0
        return 0.0, self.amp_iptg

    def edges(self, t0, t1):
        return _periodic_edges(t0, t1, self.t_start, self.period_T, [0.0, self.duty_cycle])

    def duty(self, t):
        return self.duty_cycle


@dataclass(frozen=True)
class ChannelPWMSchedule:
    """Two independent PWM carriers sharing a period; both switch on at period start."""

    amp_atc: float
    amp_iptg: float
    period_T: float
    duty_atc: float
    duty_iptg: float
    t_start: float = 0.0

    def __call__(self, t):
        phase = ((t - self.t_start) % self.period_T) / self.period_T
        return (self.amp_atc if phase < self.duty_atc else 0.0,
                self.amp_iptg if phase < self.duty_iptg else 0.0)

    def edges(self, t0, t1):
        return _periodic_edges(t0, t1, self.t_start, self.period_T,
                               [0.0, self.duty_atc, self.duty_iptg])

    def duty(self, t):
        return self.duty_atc


def _periodic_edges(t0, t1, origin, T, phases):
    out = []
    k = math.floor((t0 - origin) / T)
    while origin + k * T < t1:
        for ph in phases:
            te = origin + (k + ph) * T
            if t0 + EDGE_EPS < te < t1 - EDGE_EPS:
                out.append(te)
        k += 1
    return sorted(set(out))


@dataclass
class Trajectory:
    """Sampled trajectory of one cell. ``u`` holds (u_atc, u_iptg) per sample."""

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    duty: np.ndarray

    def __post_init__(self):
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.t)

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]

    @classmethod
    def concat(cls, parts: list["Trajectory"]) -> "Trajectory":
        """Join consecutive pieces; a duplicated boundary keeps the later sample."""
        keep = []
        for i, tr in enumerate(parts):
            if i + 1 < len(parts) and len(parts[i + 1]) and abs(tr.t[-1] - parts[i + 1].t[0]) < EDGE_EPS:
                keep.append(slice(0, len(tr) - 1))
            else:
                keep.append(slice(0, len(tr)))
        return cls(
            np.concatenate([p.t[s] for p, s in zip(parts, keep)]),
            np.concatenate([p.x[s] for p, s in zip(parts, keep)]),
            np.concatenate([p.u[s] for p, s in zip(parts, keep)]),
            np.concatenate([p.duty[s] for p, s in zip(parts, keep)]),
        )

    def window(self, ta: float, tb: float) -> "Trajectory":
        m = (self.t >= ta - EDGE_EPS) & (self.t <= tb + EDGE_EPS)
        return Trajectory(self.t[m], self.x[m], self.u[m], self.duty[m])


RHS = Callable[[float, np.ndarray, float, float], np.ndarray]


def integrate(rhs: RHS, x0, t0: float, t1: float, inputs: InputSchedule,
              tol: float = 1e-8, atol: float = 1e-10, sample_dt: float = 1.0,
              enter: Callable | None = None, method: str = "DOP853") -> Trajectory:
    """Integrate ``rhs(t, x, u_atc, u_iptg)`` restarting at every input edge.

    Samples are taken on the grid ``t0 + k*sample_dt`` plus every edge and
    ``t1``. ``enter(x, u_atc, u_iptg)`` is applied to the state at the start of
    each constant-input segment (used for instantaneous inducer diffusion).
    """
    if not t1 > t0:
        raise ValueError(f"need t1 > t0, got [{t0}, {t1}]")
    bounds = [t0, *inputs.edges(t0, t1), t1]
    n_grid = int(math.floor((t1 - t0) / sample_dt + EDGE_EPS))
    grid = t0 + sample_dt * np.arange(n_grid + 1)

    x = np.asarray(x0, dtype=float).copy()
    ts, xs = [], []
    for a, b in zip(bounds[:-1], bounds[1:]):
        u_a, u_i = inputs(0.5 * (a + b))
        if enter is not None:
            x = enter(x, u_a, u_i)
        inner = grid[(grid > a + EDGE_EPS) & (grid < b - EDGE_EPS)]
        t_eval = np.concatenate([[a], inner, [b]])

        def f(t, y):
            return rhs(t, y, u_a, u_i)

        try:
            sol = solve_ivp(f, (a, b), x, method=method, t_eval=t_eval, rtol=tol, atol=atol)
        except ValueError as exc:
            raise IntegrationError(str(exc), a) from exc
        if sol.status != 0:
            t_fail = sol.t[-1] if len(sol.t) else a
            raise IntegrationError(f"integrator failed: {sol.message}", t_fail)
        if not np.all(np.isfinite(sol.y)):
            bad = int(np.argmax(~np.all(np.isfinite(sol.y), axis=0)))
            raise IntegrationError("non-finite state", float(sol.t[bad]))
        ts.append(sol.t[:-1])
        xs.append(sol.y.T[:-1])
        x = sol.y[:, -1].copy()

    if enter is not None:
        x = enter(x, *inputs(t1))  # right-continuous inputs at t1, as recorded in ``u``
    t_all = np.concatenate(ts + [[t1]])
    x_all = np.vstack(xs + [x[None, :]])
    u_all = np.array([inputs(t) for t in t_all], dtype=float)
    d_all = np.array([inputs.duty(t) for t in t_all], dtype=float)
    return Trajectory(t_all, x_all, u_all, d_all)


class CellODE:
    """Full six-state cell with dynamic or instantaneous inducer exchange."""

    def __init__(self, p: ModelParams, diffusion: str = "dynamic"):
        if diffusion not in ("dynamic", "instantaneous"):
            raise ValueError(f"diffusion must be 'dynamic' or 'instantaneous', got {diffusion!r}")
        self.p = p
        self.diffusion = diffusion

    def rhs(self, t, x, u_atc, u_iptg):
        d = full_rhs(x, u_atc, u_iptg, self.p)
        if self.diffusion == "instantaneous":
            d[ATC] = d[IPTG] = 0.0
        return d

    def enter(self, x, u_atc, u_iptg):
        if self.diffusion == "instantaneous":
            x = x.copy()
            x[ATC], x[IPTG] = u_atc, u_iptg
        return x

    def simulate(self, x0, t0, t1, inputs, **kw) -> Trajectory:
        return integrate(self.rhs, x0, t0, t1, inputs, enter=self.enter, **kw)


def qss_time_rhs(p: ModelParams) -> RHS:
    """QSS model in minutes with instantaneous diffusion; inputs are medium levels."""
    rp = reduce_params(p)

    def rhs(t, x, u_atc, u_iptg):
        return rp.g_p * qss_rhs(x, hill_w1(u_atc, p), hill_w2(u_iptg, p), rp)

    return rhs


def period_average(traj: Trajectory, k: int, T: float, t_origin: float = 0.0) -> np.ndarray:
    """Trapezoidal mean of the state over [t_origin + kT, t_origin + (k+1)T]."""
    ta, tb = t_origin + k * T, t_origin + (k + 1) * T
    w = traj.window(ta, tb)
    if len(w) < 2 or abs(w.t[0] - ta) > 1e-6 or abs(w.t[-1] - tb) > 1e-6:
        raise ValueError(f"trajectory does not cover period {k} = [{ta}, {tb}]")
    return np.trapezoid(w.x, w.t, axis=0) / T
