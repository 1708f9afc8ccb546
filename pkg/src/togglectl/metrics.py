"""Steady-window summary statistics of a population run.

Standard deviations across cells use the population convention
(denominator n): the simulated cells are the whole population.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .integrate import EDGE_EPS
from .model import LACI, TETR

METRICS_HEADER = ("metric", "value")
SD_CONVENTION = "population sd, denominator n"


@dataclass(frozen=True)
class PopulationSamples:
    """Every cell sampled on one shared time grid. ``x`` has shape (cells, times, 6)."""

    t: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        if self.x.ndim != 3 or self.x.shape[1] != len(self.t):
            raise ValueError(f"state array shape {self.x.shape} does not match {len(self.t)} samples")


@dataclass(frozen=True)
class SummaryMetrics:
    window_start: float            # min
    window_end: float              # min
    n_cells: int
    target_cell: int
    refs: tuple[float, float]
    target_mean: tuple[float, float]
    target_sd: tuple[float, float]
    pop_mean: tuple[float, float]
    pop_sd: tuple[float, float]
    others_sd: tuple[float, float]
    target_error: tuple[float, float]
    pop_error: tuple[float, float]
    duties: tuple[tuple[int, float], ...] = ()
    sigma_periods: tuple[tuple[int, float, float], ...] = ()   # (k, |int sigma dt|, max |sigma|)

    def rows(self) -> list[tuple[str, str]]:
        out = [("sd_convention", SD_CONVENTION),
               ("window_start_min", _f(self.window_start)),
               ("window_end_min", _f(self.window_end)),
               ("n_cells", str(self.n_cells)),
               ("target_cell", str(self.target_cell))]
        for name in ("refs", "target_mean", "target_sd", "pop_mean", "pop_sd", "others_sd",
                     "target_error", "pop_error"):
            v = getattr(self, name)
            out += [(f"{name}_laci", _f(v[0])), (f"{name}_tetr", _f(v[1]))]
        out += [(f"duty_{k}", _f(d)) for k, d in self.duties]
        for k, integ, peak in self.sigma_periods:
            out += [(f"sigma_integral_{k}", _f(integ)), (f"sigma_max_{k}", _f(peak))]
        return out

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        w.writerows(self.rows())
        if path is not None:
            Path(path).write_text(buf.getvalue())
        return buf.getvalue()


def _f(v: float) -> str:
    return f"{v:.10g}"


def _time_mean(t, y):
    return np.trapezoid(y, t, axis=-1) / (t[-1] - t[0])


def _time_sd(t, y):
    m = _time_mean(t, y)
    return math.sqrt(max(float(_time_mean(t, (y - m) ** 2)), 0.0))


def _rel_error(v, ref):
    return abs(v - ref) / ref if ref > 0 else math.nan


def window_bounds(t_end: float, horizon: float, window: float) -> tuple[float, float]:
    if window <= 0:
        raise ValueError(f"window must be > 0, got {window} min")
    if window > horizon + EDGE_EPS:
        raise ValueError(f"window of {window / 60:g} h exceeds the {horizon / 60:g} h horizon")
    return t_end - window, t_end


def sigma_periods(t, laci, laci_ref, theta, period_T, ws, we, t0=0.0):
    """Per complete period inside [ws, we]: (k, |int sigma dt|, max |sigma|)."""
    sigma = (laci - laci_ref) / theta
    out = []
    k = int(math.ceil((ws - t0) / period_T - 1e-9))
    while t0 + (k + 1) * period_T <= we + 1e-6:
        a, b = t0 + k * period_T, t0 + (k + 1) * period_T
        m = (t >= a - EDGE_EPS) & (t <= b + EDGE_EPS)
        out.append((k, abs(float(np.trapezoid(sigma[m], t[m]))), float(np.max(np.abs(sigma[m])))))
        k += 1
    return tuple(out)


def compute_metrics(samples: PopulationSamples, *, refs: tuple[float, float], window: float,
                    target_cell: int = 0, horizon: float | None = None, log=(),
                    zad: tuple[float, float] | None = None) -> SummaryMetrics:
    """Metrics over the trailing ``window`` minutes.

    ``zad`` is (period_T, theta_LacI) for ZAD runs and enables the per-period
    sigma integrals.
    """
    t = samples.t
    horizon = t[-1] - t[0] if horizon is None else horizon
    ws, we = window_bounds(t[-1], horizon, window)
    m = t >= ws - EDGE_EPS
    tw = t[m]
    if len(tw) < 2:
        raise ValueError("window contains fewer than two samples")
    y = samples.x[:, m][:, :, [LACI, TETR]]            # (cells, times, 2)
    n = y.shape[0]
    tgt = y[target_cell]
    target_mean = tuple(float(_time_mean(tw, tgt[:, j])) for j in range(2))
    target_sd = tuple(_time_sd(tw, tgt[:, j]) for j in range(2))
    pop_mean = tuple(float(_time_mean(tw, y[:, :, j].mean(axis=0))) for j in range(2))
    pop_sd = tuple(float(_time_mean(tw, y[:, :, j].std(axis=0))) for j in range(2))
    if n > 1:
        rest = np.delete(y, target_cell, axis=0)
        others_sd = tuple(float(_time_mean(tw, rest[:, :, j].std(axis=0))) for j in range(2))
    else:
        others_sd = (math.nan, math.nan)
    sig = ()
    if zad is not None:
        sig = sigma_periods(t, samples.x[target_cell, :, LACI], refs[0], zad[1], zad[0], ws, we,
                            t0=t[0])
    return SummaryMetrics(
        float(ws), float(we), n, target_cell, tuple(refs), target_mean, target_sd, pop_mean,
        pop_sd, others_sd,
        (_rel_error(target_mean[0], refs[0]), _rel_error(target_mean[1], refs[1])),
        (_rel_error(pop_mean[0], refs[0]), _rel_error(pop_mean[1], refs[1])),
        tuple((int(row[0]), float(row[2])) for row in log),
        sig,
    )
