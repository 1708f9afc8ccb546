"""Equilibria of the averaged model and the D-parameterised curve database.

Curves are polylines over the duty grid 0, 0.01, ..., 1. Projections and
arc lengths are measured in nondimensional (x1, x2) coordinates.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from .model import (AvgModelInputs, ModelParams, ReducedParams, ReducedState, avg_rhs,
                    hill_w1, hill_w2, reduce_params)

DUTY_GRID = np.round(np.arange(101) * 0.01, 2)
CSV_HEADER = ("curve_id", "u_atc", "u_iptg", "D", "x1", "x2", "stable")


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, last_iterate):
        super().__init__(f"{msg}; last iterate {tuple(last_iterate)}")
        self.last_iterate = np.asarray(last_iterate, dtype=float)


class CurveBuildError(RuntimeError):
    pass


def _residual(x1, x2, a: AvgModelInputs, rp: ReducedParams):
    # avg_rhs divided by epsilon
    d = a.duty
    s1, s2 = x2 * x2, x1 * x1
    f1 = rp.k1_0 + rp.k1 * (d / (1.0 + s1 * a.w1_bar) + (1.0 - d) / (1.0 + s1)) - x1
    f2 = rp.k2_0 + rp.k2 * (d / (1.0 + s2) + (1.0 - d) / (1.0 + s2 * a.w2_bar)) - x2
    return f1, f2


def _coupling(x1, x2, a: AvgModelInputs, rp: ReducedParams):
    d = a.duty
    w1, w2 = a.w1_bar, a.w2_bar
    d12 = -2.0 * x2 * rp.k1 * (d * w1 / (1.0 + x2 * x2 * w1) ** 2
                               + (1.0 - d) / (1.0 + x2 * x2) ** 2)
    d21 = -2.0 * x1 * rp.k2 * (d / (1.0 + x1 * x1) ** 2
                               + (1.0 - d) * w2 / (1.0 + x1 * x1 * w2) ** 2)
    return d12, d21


def jacobian(x, a: AvgModelInputs, rp: ReducedParams) -> np.ndarray:
    """Analytic Jacobian of ``avg_rhs`` with respect to (x1, x2)."""
    d12, d21 = _coupling(x[0], x[1], a, rp)
    return a.epsilon * np.array([[-1.0, d12], [d21, -1.0]])


def find_equilibrium(a: AvgModelInputs, rp: ReducedParams, guess,
                     tol: float = 1e-10, max_iter: int = 100) -> ReducedState:
    """Damped Newton on the averaged vector field, started from ``guess``.

    Iterates are kept in the nonnegative quadrant; the step is halved until
    the residual norm decreases.
    """
    x1, x2 = (float(v) for v in guess)
    if not (math.isfinite(x1) and math.isfinite(x2)):
        raise ValueError(f"guess must be finite, got {guess}")
    f1, f2 = _residual(x1, x2, a, rp)
    norm = math.hypot(f1, f2)
    for _ in range(max_iter):
        if norm < tol:
            return ReducedState(x1, x2)
        d12, d21 = _coupling(x1, x2, a, rp)
        # J = [[-1, d12], [d21, -1]]; solve J dx = -f
        det = 1.0 - d12 * d21
        if det == 0.0:
            raise ConvergenceError("singular Jacobian", (x1, x2))
        dx1 = (f1 + d12 * f2) / det
        dx2 = (d21 * f1 + f2) / det
        lam = 1.0
        while True:
            y1, y2 = max(x1 + lam * dx1, 0.0), max(x2 + lam * dx2, 0.0)
            g1, g2 = _residual(y1, y2, a, rp)
            gn = math.hypot(g1, g2)
            if gn < norm or lam < 1e-6:
                break
            lam *= 0.5
        x1, x2, f1, f2, norm = y1, y2, g1, g2, gn
    if norm < tol:
        return ReducedState(x1, x2)
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations (|f| = {norm:.3g})",
                           (x1, x2))


def stability(eq, a: AvgModelInputs, rp: ReducedParams) -> tuple[bool, np.ndarray]:
    ev = np.linalg.eigvals(jacobian(eq, a, rp))
    return bool(np.all(ev.real < 0)), ev


def all_equilibria(a: AvgModelInputs, rp: ReducedParams, n_seed: int = 16) -> list[ReducedState]:
    """Every equilibrium reachable from a grid of Newton seeds, sorted by x1."""
    hi1 = rp.k1_0 + rp.k1
    hi2 = rp.k2_0 + rp.k2
    found: list[ReducedState] = []
    for s1, s2 in itertools.product(np.linspace(0, hi1, n_seed), np.linspace(0, hi2, n_seed)):
        try:
            eq = find_equilibrium(a, rp, (s1, s2))
        except ConvergenceError:
            continue
        if all(math.hypot(eq.x1 - o.x1, eq.x2 - o.x2) > 1e-6 * (1 + abs(o.x1) + abs(o.x2))
               for o in found):
            found.append(eq)
    return sorted(found)


def unforced_inputs(epsilon: float = 1.0) -> AvgModelInputs:
    return AvgModelInputs(1.0, 1.0, epsilon, 0.0)


def high_laci_equilibrium(rp: ReducedParams) -> ReducedState:
    """High-LacI stable equilibrium of the unforced switch."""
    eqs = all_equilibria(unforced_inputs(), rp)
    return max(eqs, key=lambda e: e.x1)


def _relax(a: AvgModelInputs, rp: ReducedParams, x0, horizon: float = 200.0):
    sol = solve_ivp(lambda t, y: avg_rhs(y, a, rp) / a.epsilon, (0.0, horizon), np.asarray(x0, float),
                    method="LSODA", rtol=1e-9, atol=1e-12)
    return sol.y[:, -1]


@dataclass
class EquilibriumCurve:
    curve_id: int
    amp_atc: float
    amp_iptg: float
    duty: np.ndarray
    points: np.ndarray          # shape (n, 2)
    stable: np.ndarray          # shape (n,), bool
    arclength: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        self.arclength = np.concatenate([[0.0], np.cumsum(seg)])

    def project(self, q) -> tuple[np.ndarray, float, float, float]:
        """Closest polyline point to ``q``: (point, duty, arc length, distance)."""
        q = np.asarray(q, dtype=float)
        a = self.points[:-1]
        ab = np.diff(self.points, axis=0)
        L2 = np.einsum("ij,ij->i", ab, ab)
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(L2 > 0, np.einsum("ij,ij->i", q - a, ab) / L2, 0.0)
        t = np.clip(t, 0.0, 1.0)
        proj = a + t[:, None] * ab
        dist = np.linalg.norm(proj - q, axis=1)
        i = int(np.argmin(dist))
        duty = self.duty[i] + t[i] * (self.duty[i + 1] - self.duty[i])
        s = self.arclength[i] + t[i] * math.sqrt(L2[i])
        return proj[i], float(duty), float(s), float(dist[i])


def build_curve(amp_atc: float, amp_iptg: float, p: ModelParams, curve_id: int = 0,
                duty_grid=DUTY_GRID, max_steps: int = 10) -> EquilibriumCurve:
    """Continuation in D of the stable equilibrium, starting at the D = 0 end.

    The D = 0 end is seeded from the IPTG-dominant corner. If a Newton step
    fails (at a fold of the curve) the previous point is relaxed along the
    averaged flow and Newton is restarted there.
    """
    rp = reduce_params(p)
    base = AvgModelInputs(hill_w1(amp_atc, p), hill_w2(amp_iptg, p), 1.0, 0.0)
    x = (rp.k1_0, rp.k2_0 + rp.k2)
    pts, stab = [], []
    for d in duty_grid:
        a = base.with_duty(float(d))
        try:
            x = find_equilibrium(a, rp, x, max_iter=max_steps if pts else 100)
        except ConvergenceError:
            try:
                x = find_equilibrium(a, rp, _relax(a, rp, x))
            except ConvergenceError as exc:
                raise CurveBuildError(
                    f"curve ({amp_atc}, {amp_iptg}): no equilibrium at D = {d}") from exc
        ok, ev = stability(x, a, rp)
        if not ok:
            raise CurveBuildError(
                f"curve ({amp_atc}, {amp_iptg}): unstable point at D = {d}, eigenvalues {ev}")
        pts.append(x)
        stab.append(ok)
    return EquilibriumCurve(curve_id, float(amp_atc), float(amp_iptg), np.asarray(duty_grid, float),
                            np.array(pts, dtype=float), np.array(stab, dtype=bool))


def default_amplitude_grid() -> list[tuple[float, float]]:
    """The 60 amplitude pairs: IPTG sweep at aTc = 100, aTc sweep at IPTG = 1, fixed ratio."""
    j = range(1, 21)
    return ([(100.0, round(0.05 * i, 2)) for i in j]
            + [(5.0 * i, 1.0) for i in j]
            + [(5.0 * i, round(0.05 * i, 2)) for i in j])


@dataclass
class CurveDatabase:
    curves: list[EquilibriumCurve]

    def __len__(self):
        return len(self.curves)

    def __getitem__(self, i) -> EquilibriumCurve:
        return self.curves[i]

    def find(self, amp_atc: float, amp_iptg: float) -> EquilibriumCurve:
        for c in self.curves:
            if math.isclose(c.amp_atc, amp_atc) and math.isclose(c.amp_iptg, amp_iptg):
                return c
        raise KeyError(f"no curve with amplitudes ({amp_atc}, {amp_iptg})")

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for c in self.curves:
            for d, (x1, x2), s in zip(c.duty, c.points, c.stable):
                w.writerow([c.curve_id, repr(c.amp_atc), repr(c.amp_iptg), f"{d:.2f}",
                            repr(float(x1)), repr(float(x2)), int(s)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "CurveDatabase":
        rows: dict[int, list] = {}
        with open(path, newline="") as fh:
            r = csv.DictReader(fh)
            if tuple(r.fieldnames or ()) != CSV_HEADER:
                raise ValueError(f"unexpected header {r.fieldnames}")
            for row in r:
                rows.setdefault(int(row["curve_id"]), []).append(row)
        curves = []
        for cid in sorted(rows):
            rs = rows[cid]
            curves.append(EquilibriumCurve(
                cid, float(rs[0]["u_atc"]), float(rs[0]["u_iptg"]),
                np.array([float(r["D"]) for r in rs]),
                np.array([[float(r["x1"]), float(r["x2"])] for r in rs]),
                np.array([r["stable"] == "1" for r in rs]),
            ))
        return cls(curves)


def build_database(p: ModelParams, amplitudes=None) -> CurveDatabase:
    amplitudes = default_amplitude_grid() if amplitudes is None else amplitudes
    return CurveDatabase([build_curve(a, i, p, curve_id=k) for k, (a, i) in enumerate(amplitudes)])


@lru_cache(maxsize=4)
def default_database(p: ModelParams) -> CurveDatabase:
    return build_database(p)


@dataclass(frozen=True)
class NearestPoint:
    curve_id: int
    duty_ref: float
    point: np.ndarray
    distance: float


def nearest_point(db: CurveDatabase, target) -> NearestPoint:
    """Closest point of any curve polyline; ties go to the lowest curve id, then lowest D."""
    best = None
    for c in db.curves:
        pt, d, _, dist = c.project(target)
        if best is None or dist < best.distance:
            best = NearestPoint(c.curve_id, d, pt, dist)
    return best


@dataclass(frozen=True)
class ProjectionResult:
    curve_id: int
    duty_ref: float
    ref_point: np.ndarray
    meas_point: np.ndarray
    e_pi: float


def project_and_error(curve: EquilibriumCurve, ref, meas) -> ProjectionResult:
    """Signed arc length from the projected measurement to the projected reference.

    Positive when the reference projection sits at larger D than the
    measurement projection, i.e. when more aTc is needed.
    """
    rp_, d_ref, s_ref, _ = curve.project(ref)
    mp_, _, s_meas, _ = curve.project(meas)
    return ProjectionResult(curve.curve_id, d_ref, rp_, mp_, s_ref - s_meas)


def full_state_at(x, p: ModelParams) -> np.ndarray:
    """Full state with proteins at ``x`` (nondimensional), mRNAs at QSS and no inducer."""
    laci, tetr = x[0] * p.theta_LacI, x[1] * p.theta_TetR
    return np.array([laci * p.g_p_L / p.k_p_L, tetr * p.g_p_T / p.k_p_T, laci, tetr, 0.0, 0.0])


def default_initial_state(p: ModelParams, which: str = "high-laci") -> np.ndarray:
    """Full state at one of the two stable equilibria of the unforced switch."""
    eqs = all_equilibria(unforced_inputs(), reduce_params(p))
    if which == "high-laci":
        return full_state_at(eqs[-1], p)
    if which == "low-laci":
        return full_state_at(eqs[0], p)
    raise ValueError(f"which must be 'high-laci' or 'low-laci', got {which!r}")
