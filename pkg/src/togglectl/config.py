"""Experiment configuration: INI-style ``key = value`` files with one section per concern.

Every key has a default, so an empty file is a valid configuration. Model
parameter overrides go in ``[model]`` next to ``parameter_set``.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

from .model import ModelParams, get_params

SIM_KINDS = ("deterministic", "ssa")
DIFFUSION_MODES = ("dynamic", "instantaneous")
CONTROLLERS = ("none", "pi-population", "pi-population-pwm", "pipwm", "zad", "feedforward")
OPEN_LOOP_MODES = ("constant", "pulse")
INITIAL_STATES = ("high-laci", "low-laci")
MEASURES = ("target", "mean")


class ConfigError(ValueError):
    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


@dataclass
class SimulationConfig:
    kind: str = "deterministic"
    diffusion: str = "dynamic"
    horizon: float = 48.0          # hours
    n_cells: int = 1
    seed: int = 0
    omega: float = 1.0
    tol: float = 1e-8
    refresh: float = 1.0           # SSA propensity refresh, min
    sample: float = 1.0            # output grid, min
    initial: str = "high-laci"


@dataclass
class ControllerConfig:
    kind: str = "none"
    laci_ref: float = 750.0
    tetr_ref: float = 300.0
    # PI-PWM duty compensation
    kp: float = 0.051
    ki: float = 2.37e-4
    invert_amplitudes: bool = True
    # population PI
    kp1: float = 0.05
    ki1: float = 4e-4
    kp2: float = 0.025
    ki2: float = 6.94e-4
    pi_interval: float = 5.0       # min
    max_atc: float = 100.0
    max_iptg: float = 1.0
    antiwindup: bool = True
    target_cell: int = 0
    measure: str = "target"


@dataclass
class PulseConfig:
    amp_atc: float = 50.0
    amp_iptg: float = 0.5
    period: float = 240.0          # min
    duty: float = 0.5


@dataclass
class OpenLoopConfig:
    mode: str = "constant"
    u_atc: float = 0.0
    u_iptg: float = 0.0


@dataclass
class ExperimentConfig:
    parameter_set: str = "lugagne2017"
    model_overrides: dict = field(default_factory=dict)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    pulse: PulseConfig = field(default_factory=PulseConfig)
    open_loop: OpenLoopConfig = field(default_factory=OpenLoopConfig)
    output: str = "out"

    @property
    def params(self) -> ModelParams:
        return get_params(self.parameter_set, **self.model_overrides)

    def validate(self) -> "ExperimentConfig":
        s, c, pu, ol = self.simulation, self.controller, self.pulse, self.open_loop
        _choice("simulation.kind", s.kind, SIM_KINDS)
        _choice("simulation.diffusion", s.diffusion, DIFFUSION_MODES)
        _choice("simulation.initial", s.initial, INITIAL_STATES)
        _choice("controller.kind", c.kind, CONTROLLERS)
        _choice("controller.measure", c.measure, MEASURES)
        _choice("open_loop.mode", ol.mode, OPEN_LOOP_MODES)
        _check("simulation.horizon", s.horizon > 0, "must be > 0")
        _check("simulation.n_cells", s.n_cells >= 1, "must be >= 1")
        _check("simulation.omega", s.omega > 0, "must be > 0")
        _check("simulation.tol", s.tol > 0, "must be > 0")
        _check("simulation.refresh", s.refresh > 0, "must be > 0")
        _check("simulation.sample", s.sample > 0, "must be > 0")
        _check("controller.target_cell", 0 <= c.target_cell < s.n_cells,
               f"must lie in [0, n_cells = {s.n_cells})")
        _check("controller.pi_interval", c.pi_interval > 0, "must be > 0")
        _check("controller.max_atc", c.max_atc > 0, "must be > 0")
        _check("controller.max_iptg", c.max_iptg > 0, "must be > 0")
        _check("controller.laci_ref", c.laci_ref >= 0, "must be >= 0")
        _check("controller.tetr_ref", c.tetr_ref >= 0, "must be >= 0")
        _check("pulse.amp_atc", pu.amp_atc >= 0, "must be >= 0")
        _check("pulse.amp_iptg", pu.amp_iptg >= 0, "must be >= 0")
        _check("pulse.period", pu.period > 0, "must be > 0")
        _check("pulse.duty", 0 <= pu.duty <= 1, "must lie in [0, 1]")
        _check("open_loop.u_atc", ol.u_atc >= 0, "must be >= 0")
        _check("open_loop.u_iptg", ol.u_iptg >= 0, "must be >= 0")
        try:
            self.params
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError("model", str(exc)) from None
        return self

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["model"] = {"parameter_set": self.parameter_set,
                       **{k: repr(v) for k, v in sorted(self.model_overrides.items())}}
        for name in _SECTIONS:
            cp[name] = {f.name: _fmt(getattr(getattr(self, name), f.name))
                        for f in fields(getattr(self, name))}
        cp["output"] = {"dir": self.output}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


_SECTIONS = ("simulation", "controller", "pulse", "open_loop")
_MODEL_KEYS = {f.name for f in fields(ModelParams)}


def _choice(key, v, options):
    if v not in options:
        raise ConfigError(key, f"must be one of {', '.join(options)}; got {v!r}")


def _check(key, ok, msg):
    if not ok:
        raise ConfigError(key, msg)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _coerce(key: str, raw: str, like):
    raw = raw.strip()
    try:
        if isinstance(like, bool):
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(key, f"expected {type(like).__name__}, got {raw!r}") from None


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc)) from None
    if cp.defaults():
        raise ConfigError(next(iter(cp.defaults())), "keys must belong to a section")
    cfg = ExperimentConfig()
    for sec in cp.sections():
        items = cp[sec]
        if sec == "model":
            for k, v in items.items():
                if k == "parameter_set":
                    cfg.parameter_set = v.strip()
                elif k in _MODEL_KEYS:
                    cfg.model_overrides[k] = _coerce(f"model.{k}", v, 0.0)
                else:
                    raise ConfigError(f"model.{k}", "unknown key")
        elif sec == "output":
            for k, v in items.items():
                if k != "dir":
                    raise ConfigError(f"output.{k}", "unknown key")
                cfg.output = v.strip()
        elif sec in _SECTIONS:
            obj = getattr(cfg, sec)
            known = {f.name for f in fields(obj)}
            vals = {}
            for k, v in items.items():
                if k not in known:
                    raise ConfigError(f"{sec}.{k}", "unknown key")
                vals[k] = _coerce(f"{sec}.{k}", v, getattr(obj, k))
            setattr(cfg, sec, replace(obj, **vals))
        else:
            raise ConfigError(sec, "unknown section")
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_config(path.read_text())


def list_presets() -> list[str]:
    root = resources.files("togglectl") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def preset_text(name: str) -> str:
    res = resources.files("togglectl") / "presets" / f"{name}.ini"
    if not res.is_file():
        raise ConfigError("preset", f"unknown preset {name!r}; known: {', '.join(list_presets())}")
    return res.read_text()


def load_preset(name: str) -> ExperimentConfig:
    return parse_config(preset_text(name))


def resolve_config(spec: str) -> ExperimentConfig:
    """A config file path, or the name of a bundled preset."""
    if Path(spec).is_file():
        return load_config(spec)
    return load_preset(spec)
