"""Closed-loop simulation of a cell population under a shared medium.

A control hook owns the loop timing. Each interval it is handed the current
per-cell states and returns the medium schedule for that interval; after
all cells are advanced it sees the per-cell trajectory pieces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .controllers import (PipwmController, PopulationPI, ZadController, pi_population_pwm,
                          pi_population_step, pipwm_update)
from .equilibria import ConvergenceError
from .integrate import (EDGE_EPS, CellODE, ChannelPWMSchedule, ConstantInput, InputSchedule,
                        IntegrationError, PulseSchedule, Trajectory, period_average)
from .model import ATC, IPTG, LACI, TETR, ModelParams, output_map, to_reduced
from .ssa import InducerTrack, SSAError, build_network, cell_rng, ssa_run

LOG_COLUMNS = ("period_k", "error", "duty", "accumulator")


class SimulationError(RuntimeError):
    """Numerical failure inside a control period."""

    def __init__(self, period_k: int, t: float, cause: Exception):
        super().__init__(f"period {period_k} (t = {t:g} min): {cause}")
        self.period_k = period_k
        self.t = t


class ControlHook(Protocol):
    interval: float
    log: list

    def begin(self, k: int, t: float, states: np.ndarray) -> InputSchedule: ...

    def end(self, k: int, t0: float, t1: float, pieces: list[Trajectory]) -> None: ...


@dataclass
class OpenLoop:
    schedule: InputSchedule
    interval: float = 60.0
    log: list = field(default_factory=list)

    def begin(self, k, t, states):
        return self.schedule

    def end(self, k, t0, t1, pieces):
        pass


@dataclass
class PopulationPIHook:
    """Population-mean PI; continuous inputs held for ``interval`` or per-channel PWM."""

    pi: PopulationPI
    refs: tuple[float, float]
    p: ModelParams
    interval: float = 5.0
    pwm: bool = False
    amp_atc: float = 50.0
    amp_iptg: float = 0.5
    log: list = field(default_factory=list)

    def begin(self, k, t, states):
        y = np.array([output_map(s, self.p) for s in states])
        m1, m2 = y.mean(axis=0)
        err = self.refs[0] - m1
        if self.pwm:
            d_atc, d_iptg = pi_population_pwm(m1, m2, self.refs, self.pi, self.interval,
                                              self.amp_atc, self.amp_iptg)
            self.log.append((k, err, d_atc, self.pi.laci.integral))
            return ChannelPWMSchedule(self.amp_atc, self.amp_iptg, self.interval, d_atc, d_iptg, t)
        u_atc, u_iptg = pi_population_step(m1, m2, self.refs, self.pi, self.interval)
        self.log.append((k, err, u_atc, self.pi.laci.integral))
        return ConstantInput(u_atc, u_iptg)

    def end(self, k, t0, t1, pieces):
        pass


def _measured(pieces: list[Trajectory], target: int, measure: str) -> Trajectory:
    if measure == "target":
        return pieces[target]
    if measure == "mean":
        x = np.mean([pc.x for pc in pieces], axis=0)
        return Trajectory(pieces[0].t, x, pieces[0].u, pieces[0].duty)
    raise ValueError(f"measure must be 'target' or 'mean', got {measure!r}")


@dataclass
class PipwmHook:
    ctrl: PipwmController
    p: ModelParams
    period_T: float
    target: int = 0
    measure: str = "target"
    log: list = field(default_factory=list)

    @property
    def interval(self):
        return self.period_T

    def begin(self, k, t, states):
        a, i = self.ctrl.amplitudes
        return PulseSchedule(a, i, self.period_T, self.ctrl.duty, t)

    def end(self, k, t0, t1, pieces):
        if t1 - t0 < self.period_T - EDGE_EPS:
            return  # truncated final period
        applied = self.ctrl.duty
        avg = period_average(_measured(pieces, self.target, self.measure), 0, self.period_T, t0)
        x = to_reduced(max(avg[LACI], 0.0), max(avg[TETR], 0.0), self.p)
        pipwm_update(self.ctrl, x)
        self.log.append((k, self.ctrl.last_error, applied, self.ctrl.accumulator))


@dataclass
class ZadHook:
    ctrl: ZadController
    target: int = 0
    measure: str = "target"
    log: list = field(default_factory=list)

    @property
    def interval(self):
        return self.ctrl.period_T

    def begin(self, k, t, states):
        s = states[self.target] if self.measure == "target" else states.mean(axis=0)
        d = self.ctrl.update(s[LACI], s[TETR])
        self.log.append((k, self.ctrl.sigma, d, math.nan))
        return PulseSchedule(self.ctrl.amp_atc, self.ctrl.amp_iptg, self.ctrl.period_T, d, t)

    def end(self, k, t0, t1, pieces):
        pass


@dataclass
class PopulationResult:
    trajectories: list[Trajectory]
    log: list
    target: int = 0


class DeterministicEngine:
    """All cells obey the same ODE, so one integration is shared by every cell."""

    def __init__(self, p: ModelParams, x0, n_cells: int, diffusion: str = "dynamic",
                 tol: float = 1e-8, sample_dt: float = 1.0):
        self.cell = CellODE(p, diffusion)
        self.x = np.asarray(x0, dtype=float)
        self.n_cells = n_cells
        self.tol = tol
        self.sample_dt = sample_dt

    def states(self) -> np.ndarray:
        return np.tile(self.x, (self.n_cells, 1))

    def advance(self, t0, t1, schedule) -> list[Trajectory]:
        tr = self.cell.simulate(self.x, t0, t1, schedule, tol=self.tol, sample_dt=self.sample_dt)
        self.x = tr.final.copy()
        return [tr] * self.n_cells


class SSAEngine:
    """Independent SSA cells with per-cell RNG streams derived from (seed, cell_id)."""

    def __init__(self, p: ModelParams, init_copies, n_cells: int, omega: float = 1.0,
                 diffusion: str = "dynamic", seed: int = 0, refresh: float = 1.0,
                 sample_dt: float = 1.0):
        self.net = build_network(p, omega)
        self.x = [np.array(init_copies, dtype=np.int64) for _ in range(n_cells)]
        self.inducers = [InducerTrack(p, mode=diffusion) for _ in range(n_cells)]
        self.rngs = [cell_rng(seed, i) for i in range(n_cells)]
        self.refresh = refresh
        self.sample_dt = sample_dt

    def states(self) -> np.ndarray:
        om = self.net.omega
        return np.array([np.concatenate([x / om, [ind.atc, ind.iptg]])
                         for x, ind in zip(self.x, self.inducers)])

    def advance(self, t0, t1, schedule) -> list[Trajectory]:
        out = []
        for i in range(len(self.x)):
            res = ssa_run(self.net, self.x[i], t0, t1, schedule, self.rngs[i], self.inducers[i],
                          refresh=self.refresh, sample_dt=self.sample_dt)
            self.x[i] = np.rint(res.trajectory.final[:4] * self.net.omega).astype(np.int64)
            out.append(res.trajectory)
        return out


def run_loop(engine, hook: ControlHook, horizon: float, t0: float = 0.0,
             target: int = 0) -> PopulationResult:
    n = len(engine.states())
    pieces: list[list[Trajectory]] = [[] for _ in range(n)]
    t, k = t0, 0
    end = t0 + horizon
    while t < end - EDGE_EPS:
        t1 = min(t + hook.interval, end)
        try:
            schedule = hook.begin(k, t, engine.states())
            step = engine.advance(t, t1, schedule)
            hook.end(k, t, t1, step)
        except (IntegrationError, SSAError, ConvergenceError, FloatingPointError) as exc:
            raise SimulationError(k, t, exc) from exc
        for i, tr in enumerate(step):
            pieces[i].append(tr)
        t, k = t1, k + 1
    return PopulationResult([Trajectory.concat(pc) for pc in pieces], hook.log, target)


def simulate_population(n_cells: int, p: ModelParams, hook: ControlHook, horizon: float, *,
                        kind: str = "ssa", omega: float = 1.0, diffusion: str = "dynamic",
                        seed: int = 0, init=None, refresh: float = 1.0, tol: float = 1e-8,
                        sample_dt: float = 1.0, target: int = 0) -> PopulationResult:
    """Run ``n_cells`` cells sharing one medium for ``horizon`` minutes.

    ``init`` is a full-state concentration vector; copy numbers for SSA are
    obtained by scaling with ``omega`` and rounding.
    """
    if n_cells < 1:
        raise ValueError("n_cells must be >= 1")
    if not 0 <= target < n_cells:
        raise ValueError(f"target cell {target} outside population of {n_cells}")
    init = np.asarray(init, dtype=float)
    if kind == "deterministic":
        engine = DeterministicEngine(p, init, n_cells, diffusion, tol, sample_dt)
    elif kind == "ssa":
        copies = np.rint(init[:4] * omega).astype(np.int64)
        engine = SSAEngine(p, copies, n_cells, omega, diffusion, seed, refresh, sample_dt)
        for ind in engine.inducers:
            ind.atc, ind.iptg = init[ATC], init[IPTG]
    else:
        raise ValueError(f"kind must be 'deterministic' or 'ssa', got {kind!r}")
    return run_loop(engine, hook, horizon, target=target)
