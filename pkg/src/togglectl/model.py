"""Toggle switch models: full transcription/translation, QSS and averaged.

Time is in minutes throughout. The nondimensional QSS time t' = g_p * t and
the averaged-model time tau = t' / (T * g_p) only appear inside the
right-hand sides that use them.

State vector layout of the full model (``FULL_STATE_NAMES``)::

    [mrna_laci, mrna_tetr, laci, tetr, atc, iptg]
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import NamedTuple

import numpy as np

FULL_STATE_NAMES = ("mrna_laci", "mrna_tetr", "laci", "tetr", "atc", "iptg")
MRNA_L, MRNA_T, LACI, TETR, ATC, IPTG = range(6)


@dataclass(frozen=True)
class ModelParams:
    # transcription (mRNA / min)
    k_m0_L: float = 3.20e-2
    k_m0_T: float = 1.19e-1
    k_m_L: float = 8.30
    k_m_T: float = 2.06
    # translation (protein / mRNA / min)
    k_p_L: float = 9.726e-1
    k_p_T: float = 1.170
    # degradation (1 / min)
    g_m_L: float = 1.386e-1
    g_m_T: float = 1.386e-1
    g_p_L: float = 1.65e-2
    g_p_T: float = 1.65e-2
    # regulation thresholds
    theta_LacI: float = 31.94
    theta_TetR: float = 30.00
    theta_aTc: float = 11.65
    theta_IPTG: float = 9.06e-2
    # Hill exponents
    eta_LacI: float = 2.00
    eta_TetR: float = 2.00
    eta_aTc: float = 2.00
    eta_IPTG: float = 2.00
    # membrane exchange (1 / min)
    k_in_aTc: float = 1.62e-1
    k_out_aTc: float = 2.00e-2
    k_in_IPTG: float = 2.75e-2
    k_out_IPTG: float = 1.11e-1
    # fluorescence gains
    k_RFP: float = 1.0
    k_GFP: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ValueError(f"{f.name} must be finite, got {v}")
            if f.name.startswith("eta_"):
                if v < 1:
                    raise ValueError(f"{f.name} must be >= 1, got {v}")
            elif v <= 0:
                raise ValueError(f"{f.name} must be > 0, got {v}")

    def with_overrides(self, **kw) -> "ModelParams":
        return replace(self, **kw)

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


PARAMETER_SETS = {"lugagne2017": ModelParams()}


def get_params(name: str = "lugagne2017", **overrides) -> ModelParams:
    try:
        base = PARAMETER_SETS[name]
    except KeyError:
        raise KeyError(f"unknown parameter set {name!r}; known: {sorted(PARAMETER_SETS)}") from None
    return base.with_overrides(**overrides) if overrides else base


class FullState(NamedTuple):
    mrna_laci: float
    mrna_tetr: float
    laci: float
    tetr: float
    atc: float
    iptg: float


class ReducedState(NamedTuple):
    x1: float
    x2: float


@dataclass(frozen=True)
class ReducedParams:
    """Dimensionless QSS parameters plus the shared protein decay rate."""

    k1_0: float
    k1: float
    k2_0: float
    k2: float
    g_p: float


@dataclass(frozen=True)
class PulseWaveSpec:
    amp_atc: float
    amp_iptg: float
    period_T: float
    duty: float

    def __post_init__(self):
        if self.amp_atc < 0 or self.amp_iptg < 0:
            raise ValueError("pulse amplitudes must be >= 0")
        if not self.period_T > 0:
            raise ValueError("period_T must be > 0")
        if not 0.0 <= self.duty <= 1.0:
            raise ValueError(f"duty must lie in [0, 1], got {self.duty}")


@dataclass(frozen=True)
class AvgModelInputs:
    w1_bar: float
    w2_bar: float
    epsilon: float
    duty: float

    def __post_init__(self):
        if not (0.0 < self.w1_bar <= 1.0 and 0.0 < self.w2_bar <= 1.0):
            raise ValueError("w1_bar and w2_bar must lie in (0, 1]")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not 0.0 <= self.duty <= 1.0:
            raise ValueError(f"duty must lie in [0, 1], got {self.duty}")

    @classmethod
    def from_amplitudes(cls, amp_atc: float, amp_iptg: float, period_T: float,
                        duty: float, p: ModelParams) -> "AvgModelInputs":
        return cls(hill_w1(amp_atc, p), hill_w2(amp_iptg, p), period_T * p.g_p_L, duty)

    def with_duty(self, duty: float) -> "AvgModelInputs":
        return replace(self, duty=duty)


def hill_w1(atc: float, p: ModelParams) -> float:
    """Fraction of TetR repression left on the LacI promoter at aTc level ``atc``."""
    if atc < 0:
        raise ValueError(f"aTc concentration must be >= 0, got {atc}")
    return (1.0 + (atc / p.theta_aTc) ** p.eta_aTc) ** (-p.eta_TetR)


def hill_w2(iptg: float, p: ModelParams) -> float:
    """Fraction of LacI repression left on the TetR promoter at IPTG level ``iptg``."""
    if iptg < 0:
        raise ValueError(f"IPTG concentration must be >= 0, got {iptg}")
    return (1.0 + (iptg / p.theta_IPTG) ** p.eta_IPTG) ** (-p.eta_LacI)


def _diffusion(u: float, c: float, k_in: float, k_out: float) -> float:
    return (k_in if u > c else k_out) * (u - c)


def full_rhs(s, u_atc: float, u_iptg: float, p: ModelParams) -> np.ndarray:
    """Time derivative of the six-state model with asymmetric inducer exchange."""
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError(f"non-finite state {s}")
    m_l, m_t, laci, tetr, atc, iptg = s
    # clip tiny negative round-off from the integrator before fractional powers
    atc_r = max(atc, 0.0) / p.theta_aTc
    iptg_r = max(iptg, 0.0) / p.theta_IPTG
    tetr_eff = max(tetr, 0.0) / p.theta_TetR / (1.0 + atc_r ** p.eta_aTc)
    laci_eff = max(laci, 0.0) / p.theta_LacI / (1.0 + iptg_r ** p.eta_IPTG)
    return np.array([
        p.k_m0_L + p.k_m_L / (1.0 + tetr_eff ** p.eta_TetR) - p.g_m_L * m_l,
        p.k_m0_T + p.k_m_T / (1.0 + laci_eff ** p.eta_LacI) - p.g_m_T * m_t,
        p.k_p_L * m_l - p.g_p_L * laci,
        p.k_p_T * m_t - p.g_p_T * tetr,
        _diffusion(u_atc, atc, p.k_in_aTc, p.k_out_aTc),
        _diffusion(u_iptg, iptg, p.k_in_IPTG, p.k_out_IPTG),
    ])


def reduce_params(p: ModelParams, rtol: float = 1e-9) -> ReducedParams:
    if abs(p.g_p_L - p.g_p_T) > rtol * max(p.g_p_L, p.g_p_T):
        raise ValueError(
            f"QSS reduction needs a common protein decay rate, got g_p_L={p.g_p_L}, g_p_T={p.g_p_T}")
    g_p = p.g_p_L
    lac = p.k_p_L / (p.g_m_L * p.theta_LacI * g_p)
    tet = p.k_p_T / (p.g_m_T * p.theta_TetR * g_p)
    return ReducedParams(
        k1_0=p.k_m0_L * lac, k1=p.k_m_L * lac,
        k2_0=p.k_m0_T * tet, k2=p.k_m_T * tet,
        g_p=g_p,
    )


def _check_finite(*vals):
    for v in vals:
        if not np.all(np.isfinite(v)):
            raise ValueError(f"non-finite input {v}")


def qss_rhs(x, w1: float, w2: float, rp: ReducedParams) -> np.ndarray:
    """dx/dt' of the nondimensional QSS model (t' = g_p t)."""
    _check_finite(x, w1, w2)
    x1, x2 = x
    return np.array([
        rp.k1_0 + rp.k1 / (1.0 + x2 * x2 * w1) - x1,
        rp.k2_0 + rp.k2 / (1.0 + x1 * x1 * w2) - x2,
    ])


def avg_rhs(x, a: AvgModelInputs, rp: ReducedParams) -> np.ndarray:
    """dx/dtau of the period-averaged model under mutually exclusive pulses."""
    _check_finite(x, a.w1_bar, a.w2_bar, a.epsilon, a.duty)
    x1, x2 = x
    d = a.duty
    s1, s2 = x2 * x2, x1 * x1
    return a.epsilon * np.array([
        rp.k1_0 + rp.k1 * (d / (1.0 + s1 * a.w1_bar) + (1.0 - d) / (1.0 + s1)) - x1,
        rp.k2_0 + rp.k2 * (d / (1.0 + s2) + (1.0 - d) / (1.0 + s2 * a.w2_bar)) - x2,
    ])


def pulse_inputs(t: float, spec: PulseWaveSpec) -> tuple[float, float]:
    """Medium concentrations at time ``t``; aTc occupies the first D*T of each period."""
    phase = (t % spec.period_T) / spec.period_T
    if phase < spec.duty:
        return spec.amp_atc, 0.0
    return 0.0, spec.amp_iptg


def output_map(s, p: ModelParams) -> tuple[float, float]:
    s = np.asarray(s, dtype=float)
    return p.k_RFP * s[LACI], p.k_GFP * s[TETR]


def to_reduced(laci: float, tetr: float, p: ModelParams) -> ReducedState:
    if laci < 0 or tetr < 0:
        raise ValueError("concentrations must be >= 0")
    return ReducedState(laci / p.theta_LacI, tetr / p.theta_TetR)


def from_reduced(x, p: ModelParams) -> tuple[float, float]:
    return x[0] * p.theta_LacI, x[1] * p.theta_TetR


state_scaling = to_reduced
state_unscaling = from_reduced
