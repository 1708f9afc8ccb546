"""Duty-cycle and concentration control laws.

All controllers are small state machines updated once per control interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .equilibria import CurveDatabase, EquilibriumCurve, nearest_point, project_and_error
from .model import ModelParams, ReducedParams, hill_w1, hill_w2, qss_rhs


def clamp(v: float, lo: float, hi: float) -> float:
    return min(max(v, lo), hi)


@dataclass
class PIState:
    """Discrete PI with output clamp and conditional-integration anti-windup."""

    kp: float
    ki: float
    u_min: float = 0.0
    u_max: float = math.inf
    bias: float = 0.0
    antiwindup: bool = True
    integral: float = 0.0

    def step(self, error: float, dt: float) -> float:
        integral = self.integral + self.ki * error * dt
        raw = self.bias + self.kp * error + integral
        out = clamp(raw, self.u_min, self.u_max)
        if not (self.antiwindup and out != raw):
            self.integral = integral
        return out


@dataclass
class PopulationPI:
    """Two independent PI loops on the population-mean reporters.

    Channel 1 (aTc) acts on the LacI/RFP error, channel 2 (IPTG) on the
    TetR/GFP error.
    """

    laci: PIState
    tetr: PIState

    @classmethod
    def with_gains(cls, kp1=0.05, ki1=4e-4, kp2=0.025, ki2=6.94e-4,
                   max_atc=100.0, max_iptg=1.0, antiwindup=True) -> "PopulationPI":
        return cls(PIState(kp1, ki1, 0.0, max_atc, antiwindup=antiwindup),
                   PIState(kp2, ki2, 0.0, max_iptg, antiwindup=antiwindup))


def pi_population_step(mean_y1: float, mean_y2: float, refs: tuple[float, float],
                       st: PopulationPI, dt: float) -> tuple[float, float]:
    return st.laci.step(refs[0] - mean_y1, dt), st.tetr.step(refs[1] - mean_y2, dt)


def pi_population_pwm(mean_y1: float, mean_y2: float, refs: tuple[float, float],
                      st: PopulationPI, dt: float, amp_atc: float = 50.0,
                      amp_iptg: float = 0.5) -> tuple[float, float]:
    """Per-channel duty cycles: PI output divided by the channel amplitude."""
    u_atc, u_iptg = pi_population_step(mean_y1, mean_y2, refs, st, dt)
    return clamp(u_atc / amp_atc, 0.0, 1.0), clamp(u_iptg / amp_iptg, 0.0, 1.0)


@dataclass
class PipwmController:
    curve: EquilibriumCurve
    ref: np.ndarray
    duty_ref: float
    kp: float = 0.051
    ki: float = 2.37e-4
    antiwindup: bool = True
    accumulator: float = 0.0
    duty: float = field(default=math.nan)
    last_error: float = math.nan

    def __post_init__(self):
        self.ref = np.asarray(self.ref, dtype=float)
        if math.isnan(self.duty):
            self.duty = self.duty_ref

    @property
    def amplitudes(self) -> tuple[float, float]:
        return self.curve.amp_atc, self.curve.amp_iptg


def pipwm_init(target, db: CurveDatabase, kp: float = 0.051, ki: float = 2.37e-4,
               amplitudes: tuple[float, float] | None = None,
               antiwindup: bool = True) -> PipwmController:
    """Model inversion: pick the curve and nominal duty closest to ``target``.

    With ``amplitudes`` given the curve is fixed and only D_ref is inverted.
    """
    if amplitudes is None:
        hit = nearest_point(db, target)
        curve = db[hit.curve_id]
        duty_ref = hit.duty_ref
    else:
        curve = db.find(*amplitudes)
        _, duty_ref, _, _ = curve.project(target)
    return PipwmController(curve, np.asarray(target, float), duty_ref, kp, ki, antiwindup)


def pipwm_update(ctrl: PipwmController, avg_state) -> float:
    """Duty for the next period from the last period-averaged state."""
    e = project_and_error(ctrl.curve, ctrl.ref, avg_state).e_pi
    acc = ctrl.accumulator + e
    raw = ctrl.duty_ref + ctrl.kp * e + ctrl.ki * acc
    duty = clamp(raw, 0.0, 1.0)
    if not (ctrl.antiwindup and duty != raw):
        ctrl.accumulator = acc
    ctrl.duty = duty
    ctrl.last_error = e
    return duty


def zad_sigma(laci: float, laci_ref: float, p: ModelParams) -> float:
    return (laci - laci_ref) / p.theta_LacI


def zad_sigma_dot(x, phase: str, amps: tuple[float, float], rp: ReducedParams,
                  p: ModelParams) -> float:
    """Rate of change of sigma in 1/min with one input held on, instantaneous diffusion."""
    if phase == "on":
        w1, w2 = hill_w1(amps[0], p), 1.0
    elif phase == "off":
        w1, w2 = 1.0, hill_w2(amps[1], p)
    else:
        raise ValueError(f"phase must be 'on' or 'off', got {phase!r}")
    return rp.g_p * float(qss_rhs(x, w1, w2, rp)[0])


def zad_duty(sigma_k: float, sdot_on: float, sdot_off: float, T: float,
             previous: float = 0.5) -> float:
    """Duty that zeroes the period integral of a piecewise-linear sigma."""
    den = T * (sdot_on - sdot_off)
    if abs(den) < 1e-12:
        return previous
    r = (2.0 * sigma_k + T * sdot_on) / den
    if r < 0.0:
        return 1.0
    if r > 1.0:
        return 0.0
    return 1.0 - math.sqrt(r)


@dataclass
class ZadController:
    laci_ref: float
    amp_atc: float
    amp_iptg: float
    period_T: float
    p: ModelParams
    rp: ReducedParams
    duty: float = 0.5
    sigma: float = math.nan
    sdot_on: float = math.nan
    sdot_off: float = math.nan

    def update(self, laci: float, tetr: float) -> float:
        x = (laci / self.p.theta_LacI, tetr / self.p.theta_TetR)
        amps = (self.amp_atc, self.amp_iptg)
        self.sigma = zad_sigma(laci, self.laci_ref, self.p)
        self.sdot_on = zad_sigma_dot(x, "on", amps, self.rp, self.p)
        self.sdot_off = zad_sigma_dot(x, "off", amps, self.rp, self.p)
        self.duty = zad_duty(self.sigma, self.sdot_on, self.sdot_off, self.period_T, self.duty)
        return self.duty
