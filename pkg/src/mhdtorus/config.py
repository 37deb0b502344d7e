"""Run configuration, presets and initial data.

A configuration is a YAML mapping; every section is optional and missing keys
take the defaults below. Unknown keys are rejected with the dotted path of the
offending key::

    n: 64
    formulation: primitive          # or perturbation
    params:   {mu: 0.1, lam: 0.05, kappa: 0.05, c_nu: 1.0, R: 1.0, rho_floor: 0.25}
    integrator:
      scheme: RK4                   # or IFRK4
      cfl_advective: 0.5
      cfl_diffusive: 0.25
      dt_max: 1.0e-3
      t_end: 10.0
      sample_interval: 0.05
    initial:
      kind: random                  # random | equilibrium
      seed: 7
      amplitude: 1.0e-2             # H^3 norm of (rho - rho_bar, u, vartheta - 1, m)
      band: 4
      slope: 0.0
      rho_bar: 1.0
      magnetic: independent         # independent | density-perturbation | density
    output: {dir: out, snapshot_interval: 1.0}
    analysis:
      fit_window: [2.0, 10.0]
      transient_max: 1.0
    study:
      amplitudes: [1.0e-3, 1.0e-2]
    lemmas:
      samples: 200
      resolutions: [32, 64]
      seed: 2024
"""

from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .model import ParameterError, Params, PrimitiveState
from .spectral import get_grid, random_band_limited
from .timestepper import IntegratorConfig


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


MAGNETIC_MODES = ("independent", "density-perturbation", "density")
INITIAL_KINDS = ("random", "equilibrium")
FORMULATION_NAMES = ("primitive", "perturbation")


@dataclass
class InitialData:
    kind: str = "random"
    seed: int = 7
    amplitude: float = 1e-2
    band: int = 4
    slope: float = 0.0
    rho_bar: float = 1.0
    magnetic: str = "independent"


@dataclass
class OutputConfig:
    dir: str = "out"
    snapshot_interval: float = 1.0


@dataclass
class AnalysisConfig:
    fit_window: tuple = (2.0, 10.0)
    transient_max: float = 1.0


@dataclass
class StudyConfig:
    amplitudes: tuple = (1e-3, 1e-2)


@dataclass
class LemmaConfig:
    samples: int = 200
    resolutions: tuple = (32, 64)
    seed: int = 2024


@dataclass
class RunConfig:
    n: int = 64
    formulation: str = "primitive"
    params: Params = field(default_factory=Params)
    integrator: IntegratorConfig = field(default_factory=lambda: IntegratorConfig(t_end=10.0))
    initial: InitialData = field(default_factory=InitialData)
    output: OutputConfig = field(default_factory=OutputConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    study: StudyConfig = field(default_factory=StudyConfig)
    lemmas: LemmaConfig = field(default_factory=LemmaConfig)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for section in ("analysis", "study", "lemmas"):
            for key, value in out[section].items():
                if isinstance(value, tuple):
                    out[section][key] = list(value)
        return out


SECTIONS = {
    "params": Params,
    "integrator": IntegratorConfig,
    "initial": InitialData,
    "output": OutputConfig,
    "analysis": AnalysisConfig,
    "study": StudyConfig,
    "lemmas": LemmaConfig,
}


PRESETS: dict[str, dict] = {
    "equilibrium": {
        "n": 32,
        "initial": {"kind": "equilibrium"},
        "integrator": {"t_end": 10.0},
    },
    "small-random": {
        "n": 64,
        "initial": {"kind": "random", "seed": 7, "amplitude": 1e-2},
        "integrator": {"scheme": "RK4", "t_end": 10.0},
    },
    "small-data": {
        "n": 64,
        "formulation": "perturbation",
        "initial": {"kind": "random", "seed": 7, "amplitude": 1e-3},
        "integrator": {"scheme": "IFRK4", "t_end": 10.0},
    },
    "transported-blob": {
        "n": 64,
        "initial": {"kind": "random", "seed": 7, "amplitude": 1e-2, "magnetic": "density-perturbation"},
        "integrator": {"scheme": "RK4", "t_end": 2.0},
    },
    "transported-density": {
        "n": 64,
        "initial": {"kind": "random", "seed": 7, "amplitude": 1e-2, "magnetic": "density"},
        "integrator": {"scheme": "RK4", "t_end": 2.0},
    },
    "cross-check": {
        "n": 64,
        "initial": {"kind": "random", "seed": 7, "amplitude": 1e-2},
        "integrator": {"scheme": "RK4", "t_end": 1.0},
    },
    "decay-study": {
        "n": 64,
        "formulation": "perturbation",
        "initial": {"kind": "random", "seed": 7},
        "integrator": {"scheme": "IFRK4", "t_end": 10.0},
        "study": {"amplitudes": [1e-3, 1e-2]},
    },
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _build_section(name: str, cls, raw) -> Any:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a mapping, got {type(raw).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{name}.{key}: unknown key (expected one of {sorted(known)})")
    kwargs = {}
    for key, value in raw.items():
        default = known[key].default
        kwargs[key] = _coerce(f"{name}.{key}", value, default)
    try:
        return cls(**kwargs)
    except (ParameterError, ValueError, TypeError) as err:
        bad = next((k for k in raw if k in str(err)), None)
        where = f"{name}.{bad}" if bad else name
        raise ConfigError(f"{where}: {err}") from None


def _coerce(path: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"{path}: expected a list of numbers, got {value!r}")
        kind = int if all(isinstance(v, int) for v in default) else float
        return tuple(kind(v) for v in value)
    return value


def config_from_dict(raw: dict | None) -> RunConfig:
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigError(f"top level: expected a mapping, got {type(raw).__name__}")
    top = {"n", "formulation", *SECTIONS}
    for key in raw:
        if key not in top:
            raise ConfigError(f"{key}: unknown key (expected one of {sorted(top)})")
    kwargs: dict[str, Any] = {}
    if "n" in raw:
        n = raw["n"]
        if isinstance(n, bool) or not isinstance(n, int) or n < 8 or n % 2:
            raise ConfigError(f"n: grid size must be an even integer >= 8, got {n!r}")
        kwargs["n"] = n
    if "formulation" in raw:
        if raw["formulation"] not in FORMULATION_NAMES:
            raise ConfigError(f"formulation: expected one of {FORMULATION_NAMES}, got {raw['formulation']!r}")
        kwargs["formulation"] = raw["formulation"]
    for name, cls in SECTIONS.items():
        if name in raw:
            kwargs[name] = _build_section(name, cls, raw[name])
    cfg = RunConfig(**kwargs)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    init = cfg.initial
    if init.kind not in INITIAL_KINDS:
        raise ConfigError(f"initial.kind: expected one of {INITIAL_KINDS}, got {init.kind!r}")
    if init.magnetic not in MAGNETIC_MODES:
        raise ConfigError(f"initial.magnetic: expected one of {MAGNETIC_MODES}, got {init.magnetic!r}")
    if init.kind == "random" and not init.amplitude > 0:
        raise ConfigError(f"initial.amplitude: must be positive, got {init.amplitude}")
    if not 1 <= init.band <= min(cfg.n // 2 - 1, (cfg.n - 1) // 3):
        raise ConfigError(f"initial.band: {init.band} not within the de-aliased band of n={cfg.n}")
    if init.seed < 0:
        raise ConfigError(f"initial.seed: must be non-negative, got {init.seed}")
    if not init.rho_bar > 0:
        raise ConfigError(f"initial.rho_bar: must be positive, got {init.rho_bar}")
    if cfg.formulation == "perturbation":
        try:
            cfg.params.require_unit_gas()
        except ParameterError as err:
            raise ConfigError(f"params: {err}") from None
    if not cfg.output.snapshot_interval > 0:
        raise ConfigError("output.snapshot_interval: must be positive")
    lo, hi = (tuple(cfg.analysis.fit_window) + (None, None))[:2]
    if len(cfg.analysis.fit_window) != 2 or not (0 <= lo < hi):
        raise ConfigError(f"analysis.fit_window: expected [t0, t1] with 0 <= t0 < t1, got {cfg.analysis.fit_window}")
    if not cfg.study.amplitudes or any(a <= 0 for a in cfg.study.amplitudes):
        raise ConfigError("study.amplitudes: expected a non-empty list of positive amplitudes")
    if cfg.lemmas.samples < 1:
        raise ConfigError("lemmas.samples: must be at least 1")
    if any(r < 8 or r % 2 for r in cfg.lemmas.resolutions):
        raise ConfigError("lemmas.resolutions: grid sizes must be even and >= 8")


def preset_names() -> list[str]:
    return sorted(PRESETS)


def load_config(path: str | Path | None = None, preset: str | None = None, seed: int | None = None) -> RunConfig:
    """Build a config from an optional preset overlaid with an optional YAML file."""
    raw: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r} (expected one of {preset_names()})")
        raw = copy.deepcopy(PRESETS[preset])
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as err:
            raise ConfigError(f"config: cannot read {path}: {err.strerror}") from None
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as err:
            raise ConfigError(f"config: YAML parse error: {err}") from None
        if data is not None and not isinstance(data, dict):
            raise ConfigError(f"top level: expected a mapping, got {type(data).__name__}")
        raw = _merge(raw, data or {})
    if seed is not None:
        raw = _merge(raw, {"initial": {"seed": int(seed)}, "lemmas": {"seed": int(seed)}})
    return config_from_dict(raw)


# ----------------------------------------------------------------------
# initial data


def initial_state(cfg: RunConfig) -> PrimitiveState:
    """Primitive initial data for ``cfg``.

    Random data are band-limited, mean-free fields for ``(rho - rho_bar, u,
    vartheta - 1, m)`` scaled to H^3 norm ``amplitude``; the velocity is then
    shifted by its density-weighted mean so that the total momentum vanishes.
    ``magnetic`` chooses ``m`` independently, equal to the density
    perturbation, or equal to the density itself.
    """
    init = cfg.initial
    n = cfg.n
    if init.kind == "equilibrium":
        s = PrimitiveState.equilibrium(n)
        s.rho = s.rho * init.rho_bar
        return s
    grid = get_grid(n)
    rng = np.random.default_rng(init.seed)
    a = random_band_limited(grid, rng, init.band, slope=init.slope)
    u = random_band_limited(grid, rng, init.band, components=2, slope=init.slope)
    theta = random_band_limited(grid, rng, init.band, slope=init.slope)
    m = random_band_limited(grid, rng, init.band, slope=init.slope)
    if init.magnetic == "independent":
        fields = np.stack([a, u[0], u[1], theta, m])
    else:
        fields = np.stack([a, u[0], u[1], theta])
    fields *= init.amplitude / grid.sobolev_norm(fields, 3)
    a, u, theta = fields[0], fields[1:3], fields[3]
    rho = init.rho_bar + a
    if init.magnetic == "independent":
        m = fields[4]
    elif init.magnetic == "density-perturbation":
        # rho - 1 (not the drawn a) is what both formulations see as a
        m = rho - 1.0
    else:
        m = rho.copy()
    u = u - np.mean(rho * u, axis=(-2, -1))[:, None, None] / np.mean(rho)
    return PrimitiveState(rho, u, 1.0 + theta, m)
