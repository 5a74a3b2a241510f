"""TOML run configuration with one documented defaults table.

Every numerical choice a run depends on lives either in the config file or
in ``DEFAULTS`` below; nothing else supplies hidden values.
"""

from __future__ import annotations

import copy
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .hermite import ChaosExpansion, QuadratureGrid, gauss_hermite_grid, node_budget
from .functionals import GRID_MARGIN

__all__ = [
    "ConfigError",
    "DEFAULTS",
    "ExperimentConfig",
    "VerifyConfig",
    "parse_preset",
    "load_config",
    "experiment_config_from_dict",
    "verify_config_from_dict",
]


class ConfigError(ValueError):
    """Malformed or invalid configuration. ``field`` names the offending key."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


# The defaults table. README.md mirrors it.
DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "experiment": {
        "dimension": 1,
        "initial": "first-chaos(0.01)",
        "floor": 1e-3,
        "quadrature_order": 0,  # 0 means deg(u0) + 8
        "fd_step": 0.0,  # 0 means min(1e-3, dt / 10)
        "time": {"start": 0.0, "stop": 3.0, "count": 31, "spacing": "linear"},
        "tolerances": {
            "decay_bound": 1e-6,
            "entropy_production": 1e-4,
            "interchange": 1e-4,
            "mass": 1e-12,
            "monotonicity": 1e-12,
            "near_tightness": 1e-3,
            "right_continuity": 1e-3,
        },
    },
    "verify": {
        "dimensions": [1, 2, 3],
        "max_degree": 4,
        "random_cases": 100,
        "density_cases": 30,
        "density_degree": 3,
        "density_sup": 0.3,
        "times": [0.0, 0.25, 1.0],
        "backend_times": [0.1, 0.5, 1.0],
        "backend_max_degree": 6,
        "backend_dimensions": [1, 2],
        "contraction_p": [2.0, 4.0],
        "quadrature_order": 0,  # 0 means max_degree + 1
        "floor": 1e-3,
        "tolerance": 0.0,  # >0 overrides every per-identity tolerance
        "tolerances": {},  # per-identity overrides; see verifier.DEFAULT_TOLERANCES
    },
}

PRESET_NAMES = ("uniform", "first-chaos", "second-chaos", "mixed")
_PRESET_RE = re.compile(r"^\s*([a-z\-]+)\s*(?:\(([^()]*)\))?\s*$")


def parse_preset(preset: str, dimension: int = 1) -> ChaosExpansion:
    """Initial density from a preset string, depending on the first coordinate.

    ``uniform`` is 1; ``first-chaos(e)`` is ``1 + e x``; ``second-chaos(e)`` is
    ``1 + e (x^2 - 1)``; ``mixed(c0, c1, c2)`` is ``c0 + c1 x + c2 (x^2 - 1)``.
    """
    m = _PRESET_RE.match(preset)
    if not m or m.group(1) not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {preset!r}; expected one of {PRESET_NAMES}", "initial")
    name, raw = m.group(1), m.group(2)
    try:
        args = [float(a) for a in raw.split(",")] if raw and raw.strip() else []
    except ValueError as exc:
        raise ConfigError(f"preset arguments must be numbers in {preset!r}", "initial") from exc
    expected = {"uniform": 0, "first-chaos": 1, "second-chaos": 1, "mixed": 3}[name]
    if len(args) != expected:
        raise ConfigError(f"preset {name} takes {expected} argument(s), got {len(args)}", "initial")
    if name == "uniform":
        terms = {(0,): 1.0}
    elif name == "first-chaos":
        terms = {(0,): 1.0, (1,): args[0]}
    elif name == "second-chaos":
        terms = {(0,): 1.0, (2,): args[0]}
    else:
        terms = {(0,): args[0], (1,): args[1], (2,): args[2]}
    return ChaosExpansion.from_hermite(1, terms).embed(dimension)


def _parse_index(key: str, dimension: int) -> tuple[int, ...]:
    try:
        idx = tuple(int(p) for p in key.split(","))
    except ValueError as exc:
        raise ConfigError(f"coefficient key {key!r} is not a comma-separated exponent list",
                          "experiment.coefficients") from exc
    if len(idx) != dimension or any(i < 0 for i in idx):
        raise ConfigError(f"coefficient key {key!r} must list {dimension} non-negative exponents",
                          "experiment.coefficients")
    return idx


@dataclass
class ExperimentConfig:
    dimension: int = 1
    initial: str = "first-chaos(0.01)"
    coefficients: dict[str, float] | None = None
    floor: float = 1e-3
    t_start: float = 0.0
    t_stop: float = 3.0
    t_count: int = 31
    spacing: str = "linear"
    times: list[float] | None = None
    quadrature_order: int = 0
    fd_step: float = 0.0
    tolerances: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULTS["experiment"]["tolerances"]))
    seed: int = 0
    output: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.dimension, int) or self.dimension < 1:
            raise ConfigError(f"must be a positive integer, got {self.dimension!r}", "experiment.dimension")
        if not self.floor > 0:
            raise ConfigError(f"positivity floor must be > 0, got {self.floor!r}", "experiment.floor")
        if self.times is None:
            if not self.t_stop > self.t_start >= 0:
                raise ConfigError("need stop > start >= 0", "experiment.time")
            if self.t_count < 2:
                raise ConfigError("need count >= 2", "experiment.time.count")
            if self.spacing not in ("linear", "log"):
                raise ConfigError(f"spacing must be 'linear' or 'log', got {self.spacing!r}",
                                  "experiment.time.spacing")
            if self.spacing == "log" and self.t_start <= 0:
                raise ConfigError("log spacing needs start > 0", "experiment.time.start")
        else:
            ts = [float(t) for t in self.times]
            if len(ts) < 2 or any(t < 0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
                raise ConfigError("explicit times must be >= 0, strictly increasing, at least 2",
                                  "experiment.time.values")
        if self.quadrature_order < 0:
            raise ConfigError("must be >= 0", "experiment.quadrature_order")
        if self.fd_step < 0:
            raise ConfigError("must be >= 0", "experiment.fd_step")
        for k, v in self.tolerances.items():
            if not (isinstance(v, (int, float)) and v >= 0):
                raise ConfigError(f"tolerance must be a non-negative number, got {v!r}",
                                  f"experiment.tolerances.{k}")
        u0 = self.initial_density()
        order = self.grid_order(u0)
        if self.dimension * math.log(order) > math.log(node_budget()):
            raise ConfigError(
                f"tensor grid {order}^{self.dimension} exceeds the node budget of {node_budget()}; "
                "reduce the dimension or quadrature order", "experiment.dimension")

    def initial_density(self) -> ChaosExpansion:
        if self.coefficients is not None:
            terms = {_parse_index(k, self.dimension): float(v) for k, v in self.coefficients.items()}
            return ChaosExpansion(self.dimension, terms)
        return parse_preset(self.initial, self.dimension)

    def grid_order(self, u0: ChaosExpansion | None = None) -> int:
        if self.quadrature_order:
            return self.quadrature_order
        u0 = u0 if u0 is not None else self.initial_density()
        return u0.max_degree + GRID_MARGIN

    def grid(self) -> QuadratureGrid:
        return gauss_hermite_grid(self.dimension, self.grid_order())

    def time_grid(self) -> np.ndarray:
        if self.times is not None:
            return np.array([float(t) for t in self.times])
        if self.spacing == "log":
            return np.geomspace(self.t_start, self.t_stop, self.t_count)
        return np.linspace(self.t_start, self.t_stop, self.t_count)

    def step(self) -> float:
        """Finite-difference step ``min(1e-3, dt/10)`` unless set explicitly."""
        if self.fd_step:
            return self.fd_step
        ts = self.time_grid()
        return min(1e-3, float(np.min(np.diff(ts))) / 10)

    def tolerance(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULTS["experiment"]["tolerances"][name]))

    def to_dict(self) -> dict:
        d = {
            "dimension": self.dimension,
            "initial": self.initial,
            "floor": self.floor,
            "quadrature_order": self.quadrature_order,
            "fd_step": self.fd_step,
            "time": {"start": self.t_start, "stop": self.t_stop, "count": self.t_count,
                     "spacing": self.spacing},
            "tolerances": dict(sorted(self.tolerances.items())),
        }
        if self.times is not None:
            d["time"] = {"values": [float(t) for t in self.times]}
        if self.coefficients is not None:
            d["coefficients"] = dict(self.coefficients)
        return d


@dataclass
class VerifyConfig:
    seed: int = 0
    dimensions: list[int] = field(default_factory=lambda: [1, 2, 3])
    max_degree: int = 4
    random_cases: int = 100
    density_cases: int = 30
    density_degree: int = 3
    density_sup: float = 0.3
    times: list[float] = field(default_factory=lambda: [0.0, 0.25, 1.0])
    backend_times: list[float] = field(default_factory=lambda: [0.1, 0.5, 1.0])
    backend_max_degree: int = 6
    backend_dimensions: list[int] = field(default_factory=lambda: [1, 2])
    contraction_p: list[float] = field(default_factory=lambda: [2.0, 4.0])
    quadrature_order: int = 0
    floor: float = 1e-3
    tolerance: float = 0.0
    tolerances: dict[str, float] = field(default_factory=dict)
    output: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.dimensions or any((not isinstance(n, int)) or n < 1 for n in self.dimensions):
            raise ConfigError("must be a non-empty list of positive integers", "verify.dimensions")
        for name in ("max_degree", "random_cases", "density_cases", "density_degree", "backend_max_degree"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise ConfigError(f"must be a non-negative integer, got {v!r}", f"verify.{name}")
        if any(t < 0 for t in self.times + self.backend_times):
            raise ConfigError("times must be >= 0", "verify.times")
        if any(p <= 1 for p in self.contraction_p):
            raise ConfigError("contraction exponents must be > 1", "verify.contraction_p")
        if not self.floor > 0:
            raise ConfigError("must be > 0", "verify.floor")
        if not 0 < self.density_sup < 1:
            raise ConfigError("must lie in (0, 1)", "verify.density_sup")
        if self.tolerance < 0 or any(v < 0 for v in self.tolerances.values()):
            raise ConfigError("tolerances must be >= 0", "verify.tolerance")
        budget = node_budget()
        for n in self.dimensions + self.backend_dimensions:
            order = self.grid_order()
            if n * math.log(order) > math.log(budget):
                raise ConfigError(
                    f"tensor grid {order}^{n} exceeds the node budget of {budget}; "
                    "reduce the dimension (set OU_LAB_NODE_BUDGET to raise the budget)",
                    "verify.dimensions")

    def grid_order(self) -> int:
        return self.quadrature_order or (self.max_degree + 1)

    def to_dict(self) -> dict:
        d = {k: copy.deepcopy(getattr(self, k)) for k in DEFAULTS["verify"]}
        d["seed"] = self.seed
        return d


def _merge(base: dict, override: dict, prefix: str) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        key = f"{prefix}.{k}" if prefix else k
        if k not in base:
            raise ConfigError("unknown key", key)
        if isinstance(base[k], dict) and base[k] and not isinstance(v, dict):
            raise ConfigError("expected a table", key)
        if isinstance(base[k], dict) and base[k]:
            out[k] = _merge(base[k], v, key)
        else:
            out[k] = v
    return out


def _typed(value, kind, field_name):
    try:
        if kind is int:
            if isinstance(value, bool) or not float(value).is_integer():
                raise ValueError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if kind is str:
            if not isinstance(value, str):
                raise ValueError
            return value
    except (TypeError, ValueError):
        raise ConfigError(f"expected {kind.__name__}, got {value!r}", field_name) from None
    return value


def experiment_config_from_dict(raw: dict, seed: int | None = None) -> ExperimentConfig:
    section = raw.get("experiment", {})
    if not isinstance(section, dict):
        raise ConfigError("expected a table", "experiment")
    section = dict(section)
    coefficients = section.pop("coefficients", None)
    time_values = None
    if isinstance(section.get("time"), dict) and "values" in section["time"]:
        section["time"] = dict(section["time"])
        time_values = section["time"].pop("values")
        if not isinstance(time_values, list):
            raise ConfigError("expected a list of times", "experiment.time.values")
    d = _merge(DEFAULTS["experiment"], section, "experiment")
    if coefficients is not None and not isinstance(coefficients, dict):
        raise ConfigError("expected a table of exponent-key = value", "experiment.coefficients")
    t = d["time"]
    return ExperimentConfig(
        dimension=_typed(d["dimension"], int, "experiment.dimension"),
        initial=_typed(d["initial"], str, "experiment.initial"),
        coefficients=coefficients,
        floor=_typed(d["floor"], float, "experiment.floor"),
        t_start=_typed(t["start"], float, "experiment.time.start"),
        t_stop=_typed(t["stop"], float, "experiment.time.stop"),
        t_count=_typed(t["count"], int, "experiment.time.count"),
        spacing=_typed(t["spacing"], str, "experiment.time.spacing"),
        times=[_typed(v, float, "experiment.time.values") for v in time_values] if time_values else None,
        quadrature_order=_typed(d["quadrature_order"], int, "experiment.quadrature_order"),
        fd_step=_typed(d["fd_step"], float, "experiment.fd_step"),
        tolerances={k: _typed(v, float, f"experiment.tolerances.{k}") for k, v in d["tolerances"].items()},
        seed=_typed(raw.get("seed", DEFAULTS["seed"]) if seed is None else seed, int, "seed"),
        output=raw.get("output"),
    )


def verify_config_from_dict(raw: dict, seed: int | None = None) -> VerifyConfig:
    section = raw.get("verify", {})
    if not isinstance(section, dict):
        raise ConfigError("expected a table", "verify")
    d = _merge(DEFAULTS["verify"], section, "verify")
    if not isinstance(d["tolerances"], dict):
        raise ConfigError("expected a table", "verify.tolerances")
    from .verifier import DEFAULT_TOLERANCES

    for k in d["tolerances"]:
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown identity; expected one of {sorted(DEFAULT_TOLERANCES)}",
                              f"verify.tolerances.{k}")

    def ints(key):
        v = d[key]
        if not isinstance(v, list):
            raise ConfigError("expected a list", f"verify.{key}")
        return [_typed(x, int, f"verify.{key}") for x in v]

    def floats(key):
        v = d[key]
        if not isinstance(v, list):
            raise ConfigError("expected a list", f"verify.{key}")
        return [_typed(x, float, f"verify.{key}") for x in v]

    return VerifyConfig(
        seed=_typed(raw.get("seed", DEFAULTS["seed"]) if seed is None else seed, int, "seed"),
        dimensions=ints("dimensions"),
        max_degree=_typed(d["max_degree"], int, "verify.max_degree"),
        random_cases=_typed(d["random_cases"], int, "verify.random_cases"),
        density_cases=_typed(d["density_cases"], int, "verify.density_cases"),
        density_degree=_typed(d["density_degree"], int, "verify.density_degree"),
        density_sup=_typed(d["density_sup"], float, "verify.density_sup"),
        times=floats("times"),
        backend_times=floats("backend_times"),
        backend_max_degree=_typed(d["backend_max_degree"], int, "verify.backend_max_degree"),
        backend_dimensions=ints("backend_dimensions"),
        contraction_p=floats("contraction_p"),
        quadrature_order=_typed(d["quadrature_order"], int, "verify.quadrature_order"),
        floor=_typed(d["floor"], float, "verify.floor"),
        tolerance=_typed(d["tolerance"], float, "verify.tolerance"),
        tolerances={k: _typed(v, float, f"verify.tolerances.{k}") for k, v in d["tolerances"].items()},
        output=raw.get("output"),
    )


def load_config(path: str | Path) -> dict:
    """Parse a TOML file. Syntax errors become :class:`ConfigError` with line/column."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML ({exc})", str(path)) from exc
    unknown = set(raw) - {"seed", "output", "experiment", "verify"}
    if unknown:
        raise ConfigError("unknown top-level key", sorted(unknown)[0])
    return raw
