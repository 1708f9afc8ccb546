"""Experiment orchestration: config -> simulation -> CSV artifacts -> summary."""
from __future__ import annotations

import csv
import io
import logging
import re
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config
from .controllers import PopulationPI, ZadController, pipwm_init
from .equilibria import (CurveDatabase, build_curve, build_database, default_database,
                         default_initial_state)
from .integrate import ConstantInput, PulseSchedule
from .metrics import PopulationSamples, SummaryMetrics, compute_metrics
from .model import ModelParams, reduce_params, to_reduced
from .population import (LOG_COLUMNS, OpenLoop, PipwmHook, PopulationPIHook, PopulationResult,
                         ZadHook, simulate_population)

log = logging.getLogger(__name__)

TRAJECTORY_HEADER = ("time_min", "cell_id", "mrna_laci", "mrna_tetr", "laci", "tetr",
                     "atc_intra", "iptg_intra", "u_atc", "u_iptg", "duty")
CONFIG_FILE = "config.ini"
TRAJECTORY_FILE = "trajectories.csv"
LOG_FILE = "controller_log.csv"
METRICS_FILE = "metrics.csv"
OUTPUT_FILES = (CONFIG_FILE, TRAJECTORY_FILE, LOG_FILE, METRICS_FILE)


def pipwm_curves(cfg: ExperimentConfig, p: ModelParams) -> CurveDatabase:
    """Curve set searched by model inversion: all 60 curves, or the configured pulse pair."""
    if cfg.controller.invert_amplitudes:
        return default_database(p)
    return CurveDatabase([build_curve(cfg.pulse.amp_atc, cfg.pulse.amp_iptg, p)])


def build_hook(cfg: ExperimentConfig, p: ModelParams):
    c, pu = cfg.controller, cfg.pulse
    refs = (c.laci_ref, c.tetr_ref)
    if c.kind == "none":
        ol = cfg.open_loop
        if ol.mode == "pulse":
            sched = PulseSchedule(pu.amp_atc, pu.amp_iptg, pu.period, pu.duty, 0.0)
            return OpenLoop(sched, interval=pu.period)
        return OpenLoop(ConstantInput(ol.u_atc, ol.u_iptg), interval=60.0)
    if c.kind in ("pi-population", "pi-population-pwm"):
        pi = PopulationPI.with_gains(c.kp1, c.ki1, c.kp2, c.ki2, c.max_atc, c.max_iptg,
                                     c.antiwindup)
        return PopulationPIHook(pi, refs, p, c.pi_interval, pwm=c.kind == "pi-population-pwm",
                                amp_atc=pu.amp_atc, amp_iptg=pu.amp_iptg)
    if c.kind in ("pipwm", "feedforward"):
        kp, ki = (0.0, 0.0) if c.kind == "feedforward" else (c.kp, c.ki)
        db = pipwm_curves(cfg, p)
        ctrl = pipwm_init(to_reduced(*refs, p), db, kp, ki, antiwindup=c.antiwindup)
        log.info("inversion: curve (%g, %g), D_ref = %.4f", *ctrl.amplitudes, ctrl.duty_ref)
        return PipwmHook(ctrl, p, pu.period, c.target_cell, c.measure)
    if c.kind == "zad":
        ctrl = ZadController(c.laci_ref, pu.amp_atc, pu.amp_iptg, pu.period, p, reduce_params(p),
                             duty=pu.duty)
        return ZadHook(ctrl, c.target_cell, c.measure)
    raise ValueError(f"unknown controller {c.kind!r}")


def simulate(cfg: ExperimentConfig, seed: int | None = None) -> PopulationResult:
    cfg.validate()
    s = cfg.simulation
    p = cfg.params
    return simulate_population(
        s.n_cells, p, build_hook(cfg, p), s.horizon * 60.0, kind=s.kind, omega=s.omega,
        diffusion=s.diffusion, seed=s.seed if seed is None else seed,
        init=default_initial_state(p, s.initial), refresh=s.refresh, tol=s.tol,
        sample_dt=s.sample, target=cfg.controller.target_cell)


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def trajectories_csv(result: PopulationResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    for cid, tr in enumerate(result.trajectories):
        for t, x, u, d in zip(tr.t, tr.x, tr.u, tr.duty):
            w.writerow([_fmt(t), cid, *map(_fmt, x), _fmt(u[0]), _fmt(u[1]), _fmt(d)])
    return buf.getvalue()


def log_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_COLUMNS)
    for k, e, d, acc in rows:
        w.writerow([int(k), _fmt(e), _fmt(d), _fmt(acc)])
    return buf.getvalue()


def samples_of(result: PopulationResult) -> PopulationSamples:
    t = result.trajectories[0].t
    for tr in result.trajectories[1:]:
        if len(tr.t) != len(t) or not np.array_equal(tr.t, t):
            raise ValueError("cells were sampled on different time grids")
    return PopulationSamples(t, np.stack([tr.x for tr in result.trajectories]))


def metrics_for(cfg: ExperimentConfig, samples: PopulationSamples, log_rows,
                window_h: float = 24.0) -> SummaryMetrics:
    c = cfg.controller
    zad = (cfg.pulse.period, cfg.params.theta_LacI) if c.kind == "zad" else None
    return compute_metrics(samples, refs=(c.laci_ref, c.tetr_ref), window=window_h * 60.0,
                           target_cell=c.target_cell, horizon=cfg.simulation.horizon * 60.0,
                           log=log_rows, zad=zad)


def _check_out_dir(out: Path, force: bool):
    if out.exists() and not out.is_dir():
        raise FileExistsError(f"{out} exists and is not a directory")
    if out.is_dir() and any(out.iterdir()) and not force:
        raise FileExistsError(f"{out} is not empty; pass --force to overwrite")


def run_experiment(cfg: ExperimentConfig, out=None, *, seed: int | None = None,
                   force: bool = False, window_h: float = 24.0) -> Path:
    """Run ``cfg`` and write the four output files into ``out``."""
    cfg.validate()
    if seed is not None:
        cfg.simulation.seed = seed
    out = Path(cfg.output if out is None else out)
    cfg.output = str(out)
    _check_out_dir(out, force)
    result = simulate(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_FILE).write_text(cfg.to_ini())
    (out / TRAJECTORY_FILE).write_text(trajectories_csv(result))
    (out / LOG_FILE).write_text(log_csv(result.log))
    window_h = min(window_h, cfg.simulation.horizon)
    metrics_for(cfg, samples_of(result), result.log, window_h).to_csv(out / METRICS_FILE)
    return out


def read_trajectories(path) -> PopulationSamples:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if tuple(header) != TRAJECTORY_HEADER:
        raise ValueError(f"{path}: unexpected header {header}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    cells = np.unique(data[:, 1]).astype(int)
    rows = [data[data[:, 1] == c] for c in cells]
    t = rows[0][:, 0]
    if any(len(r) != len(t) or not np.array_equal(r[:, 0], t) for r in rows):
        raise ValueError(f"{path}: cells were sampled on different time grids")
    return PopulationSamples(t, np.stack([r[:, 2:8] for r in rows]))


def read_log(path) -> list[tuple]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        if tuple(next(r)) != LOG_COLUMNS:
            raise ValueError(f"{path}: unexpected header")
        return [(int(k), float(e), float(d), float(a)) for k, e, d, a in r]


def summarize(outputs, window: float = 24.0) -> SummaryMetrics:
    """Recompute metrics of an output directory over the trailing ``window`` hours."""
    out = Path(outputs)
    missing = [f for f in OUTPUT_FILES if not (out / f).is_file()]
    if missing:
        raise FileNotFoundError(f"{out}: missing {', '.join(missing)}")
    cfg = load_config(out / CONFIG_FILE)
    return metrics_for(cfg, read_trajectories(out / TRAJECTORY_FILE), read_log(out / LOG_FILE),
                       window)


_GRID_RE = re.compile(r"^\s*([0-9.eE+-]+)\s*[:x,]\s*([0-9.eE+-]+)\s*$")


def parse_grid_spec(spec: str) -> list[tuple[float, float]]:
    """Amplitude pairs ``atc:iptg`` separated by ``;``, e.g. ``"35:0.35;50:0.5"``."""
    pairs = []
    for item in filter(None, (s.strip() for s in spec.split(";"))):
        m = _GRID_RE.match(item)
        if not m:
            raise ValueError(f"bad amplitude pair {item!r}; expected ATC:IPTG")
        a, i = float(m.group(1)), float(m.group(2))
        if a < 0 or i < 0:
            raise ValueError(f"amplitudes must be >= 0, got {item!r}")
        pairs.append((a, i))
    if not pairs:
        raise ValueError("grid spec contains no amplitude pairs")
    return pairs


def gen_curves(amplitudes=None, p: ModelParams | None = None, path=None) -> str:
    """Serialized curve database; ``amplitudes`` defaults to the 60-pair grid."""
    db = build_database(ModelParams() if p is None else p, amplitudes)
    return db.to_csv(path)

