"""Run configuration: schema, defaults, and parsing of INI-style or JSON
config files.

The schema is flat key = value lines grouped under [section] headers; a .json
file with the same section/key nesting is accepted as an alternative. Unknown
sections or keys are rejected so typos fail loudly instead of silently using
a default.
"""

from __future__ import annotations

import configparser
import json
import math
import os
import warnings
from dataclasses import dataclass, field, asdict

from .errors import ConfigurationError

__all__ = ["RunConfig", "parse_config", "SMALLNESS_THRESHOLD"]

# u_b * sqrt(t_final) beyond this triggers the small-data warning
SMALLNESS_THRESHOLD = 0.2

_SCHEMA = {
    "grid": {"n_v": int, "v_max": float},
    "collision": {"backend": str, "nu0": float, "angular_order": int,
                  "matrix_byte_budget": float},
    "profile": {"u_b": float, "delta": float, "kappa_mode": str,
                "kappa": float},
    "slab": {"n_x": int, "x_max": float, "t_final": float, "cfl": float,
             "mode": str, "include_Ltilde": bool, "include_GammaRR": bool,
             "limiter": str, "output_every": int},
    "sweep": {"epsilons": list},
    "output": {"directory": str},
}


@dataclass
class RunConfig:
    """Validated configuration for a single run or a sweep."""

    n_v: int = 16
    v_max: float = 6.0
    backend: str = "bgk"
    nu0: float = 1.0
    angular_order: int = 8
    matrix_byte_budget: float = 2.5e9
    u_b: float = 0.05
    delta: float = 0.5
    kappa_mode: str = "computed"
    kappa: float = 0.0
    n_x: int = 200
    x_max: float = 16.0
    t_final: float = 0.5
    cfl: float = 0.5
    mode: str = "direct_bgk"
    include_Ltilde: bool = True
    include_GammaRR: bool = False
    limiter: str = "upwind"
    output_every: int = 20
    epsilons: list = field(default_factory=lambda: [0.4, 0.2, 0.1])
    directory: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n_v < 4 or self.n_v % 2:
            raise ConfigurationError("grid.n_v must be an even integer >= 4")
        if self.v_max <= 0:
            raise ConfigurationError("grid.v_max must be positive")
        if self.backend not in ("bgk", "hardsphere"):
            raise ConfigurationError(
                f"collision.backend must be bgk or hardsphere, got {self.backend!r}")
        if self.backend == "bgk" and self.nu0 <= 0:
            raise ConfigurationError("collision.nu0 must be positive")
        if self.angular_order < 8:
            raise ConfigurationError("collision.angular_order must be >= 8")
        if self.u_b < 0:
            raise ConfigurationError("profile.u_b must be nonnegative")
        if self.delta <= 0:
            raise ConfigurationError("profile.delta must be positive")
        if self.kappa_mode not in ("computed", "fixed"):
            raise ConfigurationError("profile.kappa_mode must be computed or fixed")
        if self.kappa_mode == "fixed" and self.kappa <= 0:
            raise ConfigurationError("profile.kappa must be positive when fixed")
        if self.mode not in ("remainder", "direct_bgk", "direct_hs"):
            raise ConfigurationError(
                f"slab.mode must be remainder, direct_bgk or direct_hs, got {self.mode!r}")
        if self.limiter not in ("upwind", "minmod"):
            raise ConfigurationError("slab.limiter must be upwind or minmod")
        if self.n_x < 4 or self.x_max <= 0 or self.t_final <= 0:
            raise ConfigurationError("slab needs n_x >= 4, x_max > 0, t_final > 0")
        if not 0 < self.cfl <= 1:
            raise ConfigurationError("slab.cfl must lie in (0, 1]")
        if self.output_every < 1:
            raise ConfigurationError("slab.output_every must be >= 1")
        if not self.epsilons:
            raise ConfigurationError("sweep.epsilons must be nonempty")
        for e in self.epsilons:
            if not 0.0 < e < 1.0:
                raise ConfigurationError(
                    f"epsilon must satisfy 0 < eps < 1, got {e}")
        if any(b >= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ConfigurationError("sweep.epsilons must be strictly decreasing")
        if self.u_b * math.sqrt(self.t_final) >= SMALLNESS_THRESHOLD:
            warnings.warn(
                f"u_b*sqrt(t_final) = {self.u_b * math.sqrt(self.t_final):.3g} "
                f">= {SMALLNESS_THRESHOLD}: outside the small-data regime the "
                "error bounds are calibrated for", stacklevel=2)

    def as_sections(self) -> dict:
        flat = asdict(self)
        return {sec: {k: flat[k] for k in keys} for sec, keys in _SCHEMA.items()}


def _coerce(section: str, key: str, raw, want):
    try:
        if want is bool:
            if isinstance(raw, bool):
                return raw
            val = str(raw).strip().lower()
            if val in ("true", "1", "yes", "on"):
                return True
            if val in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if want is list:
            if isinstance(raw, (list, tuple)):
                return [float(x) for x in raw]
            return [float(x) for x in str(raw).replace(",", " ").split()]
        return want(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(
            f"[{section}] {key}: cannot parse {raw!r} as {want.__name__}") from exc


def _from_sections(data: dict) -> RunConfig:
    kwargs = {}
    for section, keys in data.items():
        if section not in _SCHEMA:
            raise ConfigurationError(f"unknown config section [{section}]")
        for key, raw in keys.items():
            if key not in _SCHEMA[section]:
                raise ConfigurationError(f"unknown key {key!r} in section [{section}]")
            kwargs[key] = _coerce(section, key, raw, _SCHEMA[section][key])
    return RunConfig(**kwargs)


def parse_config(path: str) -> RunConfig:
    """Loads and validates a config file; missing keys take defaults."""
    if not os.path.isfile(path):
        raise ConfigurationError(f"config file not found: {path}")
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(
                    f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: top level must be an object")
        return _from_sections(data)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh, source=path)
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    data = {sec: dict(parser.items(sec)) for sec in parser.sections()}
    return _from_sections(data)
