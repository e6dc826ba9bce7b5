"""Experiment configuration: a flat ``key = value`` text format with ``#`` comments."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from ..dispensable import PARSES
from ..model import RadiusLaw, WeightSpec

EXPERIMENTS = ("sandwich", "matern-check", "uniqueness", "dispensable", "theta-grid",
               "huge-scan", "shield", "isoperimetric")


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


def parse_law(text: str) -> RadiusLaw:
    kind, _, rest = text.strip().partition(":")
    try:
        nums = [float(v) for v in rest.split(",")]
    except ValueError:
        raise ValueError(f"bad radius law {text!r}") from None
    if kind == "fixed" and len(nums) == 1:
        return RadiusLaw.fixed(nums[0])
    if kind == "uniform" and len(nums) == 2:
        return RadiusLaw.uniform(*nums)
    raise ValueError(f"bad radius law {text!r}; use fixed:r or uniform:lo,hi")


def parse_weight(text: str) -> WeightSpec:
    kind, _, rest = text.strip().partition(":")
    if kind in ("unit", "volume") and not rest:
        return WeightSpec(kind)
    if kind == "exp" and rest:
        return WeightSpec.exp_radius(float(rest))
    raise ValueError(f"bad weight {text!r}; use unit, volume or exp:a")


def _float(text: str) -> float:
    return float(text)


def _int(text: str) -> int:
    return int(text)


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _str(text: str) -> str:
    return text.strip()


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    dim: int = 2
    window: str = "torus"
    window_size: float = 20.0
    intensity: float = 1.0
    radius_law: RadiusLaw = RadiusLaw.uniform(0.3, 0.5)
    weight: WeightSpec = WeightSpec.volume()
    seed_intensities: tuple = (1.0, 0.25, 0.0625)
    a_values: tuple = (2, 4, 8)
    p_values: tuple = (0.2, 0.4, 0.6, 0.8)
    q_values: tuple = (0.5,)
    s_max: int = 3
    m: float = 1.0
    m_factor: float = 3.0
    cap: int = 40
    max_component: int = 12
    replicates: int = 100
    master_seed: int = 0
    samples: int = 4000
    parse: str = "verbatim"
    output: str = ""


PARSERS = {
    "experiment": _str, "dim": _int, "window": _str, "window_size": _float,
    "intensity": _float, "radius_law": parse_law, "weight": parse_weight,
    "seed_intensities": _floats, "a_values": _ints, "p_values": _floats, "q_values": _floats,
    "s_max": _int, "m": _float, "m_factor": _float, "cap": _int, "max_component": _int,
    "replicates": _int, "master_seed": _int, "samples": _int, "parse": _str, "output": _str,
}

# defaults per experiment reproduce the reference parameter sets
EXPERIMENT_DEFAULTS = {
    "sandwich": dict(window_size=20.0, intensity=1.0, radius_law=RadiusLaw.uniform(0.3, 0.5),
                     replicates=200),
    "matern-check": dict(window_size=30.0, intensity=0.5, radius_law=RadiusLaw.fixed(0.4),
                         replicates=2000),
    "uniqueness": dict(window_size=10.0, intensity=0.8, s_max=12, m=math.inf, replicates=300),
    "dispensable": dict(window_size=10.0, intensity=0.8, replicates=300),
    "theta-grid": dict(window="ball", window_size=8.0, intensity=1.2,
                       radius_law=RadiusLaw.uniform(1.0, 1.1), replicates=500),
    "huge-scan": dict(window_size=24.0, intensity=1.0, radius_law=RadiusLaw.uniform(0.0, 1.0),
                      replicates=300),
    "shield": dict(window_size=24.0, intensity=1.0, radius_law=RadiusLaw.uniform(0.0, 1.0),
                   s_max=3, m_factor=3.0, replicates=300),
    "isoperimetric": dict(window_size=20.0, m=1.0, replicates=200),
}


def _validate(cfg: ExperimentConfig) -> None:
    def fail(key, msg):
        raise ConfigError(msg, key=key)

    if cfg.experiment not in EXPERIMENTS:
        fail("experiment", f"unknown experiment {cfg.experiment!r}; choose from {EXPERIMENTS}")
    if cfg.dim not in (1, 2, 3):
        fail("dim", "must be 1, 2 or 3")
    if cfg.window not in ("torus", "ball"):
        fail("window", "must be torus or ball")
    if not cfg.window_size > 0:
        fail("window_size", "must be positive")
    if cfg.window == "ball" and cfg.window_size < 3:
        fail("window_size", "a free ball needs radius >= 3")
    if not cfg.intensity > 0:
        fail("intensity", "must be positive")
    if not cfg.seed_intensities or any(not s > 0 for s in cfg.seed_intensities):
        fail("seed_intensities", "needs positive values")
    if not cfg.a_values or any(a < 1 for a in cfg.a_values):
        fail("a_values", "needs integers >= 1")
    for key in ("p_values", "q_values"):
        vals = getattr(cfg, key)
        if not vals or any(not 0 < v < 1 for v in vals):
            fail(key, "needs values in (0, 1)")
    for key in ("s_max", "cap", "max_component", "replicates", "samples"):
        if getattr(cfg, key) < 1:
            fail(key, "must be >= 1")
    if not cfg.m > 0:
        fail("m", "must be positive")
    if not cfg.m_factor > 0:
        fail("m_factor", "must be positive")
    if cfg.master_seed < 0:
        fail("master_seed", "must be >= 0")
    if cfg.parse not in PARSES:
        fail("parse", f"must be one of {PARSES}")


def _convert(key: str, raw: str, line: int | None):
    if key not in PARSERS:
        raise ConfigError("unknown key", key=key, line=line)
    try:
        return PARSERS[key](raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {raw!r}: {exc}", key=key, line=line) from None


def parse_config(text: str, overrides: dict | None = None,
                 experiment: str | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``overrides`` (raw strings, e.g. CLI flags) win."""
    values, lines = {}, {}
    for num, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, val = body.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError("expected 'key = value'", line=num)
        if key in values:
            raise ConfigError(f"duplicate key (first set on line {lines[key]})", key=key, line=num)
        values[key] = _convert(key, val.strip(), num)
        lines[key] = num
    for key, val in (overrides or {}).items():
        key = key.replace("-", "_")
        values[key] = _convert(key, str(val), None)
    if experiment is not None:
        values["experiment"] = experiment
    if "experiment" not in values:
        raise ConfigError("missing required key", key="experiment")
    name = values["experiment"]
    merged = dict(EXPERIMENT_DEFAULTS.get(name, {}))
    merged.update(values)
    try:
        cfg = ExperimentConfig(**merged)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        _validate(cfg)
    except ConfigError as exc:
        if exc.key in lines:
            raise ConfigError(str(exc).split(": ", 1)[1], key=exc.key, line=lines[exc.key]) from None
        raise
    return cfg


def serialize_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{f.name} = {_fmt(getattr(cfg, f.name))}\n" for f in fields(cfg))


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    out = replace(cfg, **changes)
    _validate(out)
    return out
