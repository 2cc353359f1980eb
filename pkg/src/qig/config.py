"""TOML experiment configuration with strict validation.

A config file names one experiment and its parameters::

    experiment = "coin-info"
    output_dir = "out/coin"
    seed = 0
    threads = 1

    [parameters]
    lambda_min = 0.01
    lambda_max = 0.99
    points = 99

Unknown keys at either level are rejected. Parameters missing from the file
take the defaults below; the parsed config always carries the full set, so
``dump_config`` followed by ``parse_config`` reproduces it exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import tomli
import tomli_w

from .errors import ConfigError

DEFAULTS: dict[str, dict[str, Any]] = {
    "coin-info": {"lambda_min": 0.01, "lambda_max": 0.99, "points": 99},
    "qubit-info": {
        "delta": 1.0,
        "beta_min": 0.1,
        "beta_max": 5.0,
        "points": 50,
        "phi_over_pi": [0.5, 0.25],
    },
    "two-spin": {"points": 50},
    "tfim-scaling": {"sizes": [8, 10, 12, 14], "couplings": [1.0], "periodic": True},
    "chern-sweep": {"masses": [-3.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 3.0], "grid": 64},
    "bloch-geometry": {"n_polar": 129, "n_azimuth": 64},
}

TOP_LEVEL = {"experiment", "output_dir", "seed", "threads", "parameters"}


@dataclass
class ExperimentConfig:
    """One validated experiment run description."""

    experiment: str
    parameters: dict[str, Any] = field(default_factory=dict)
    output_dir: str = "out"
    seed: Optional[int] = None
    threads: Optional[int] = None

    def __post_init__(self) -> None:
        if self.experiment not in DEFAULTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {sorted(DEFAULTS)}")
        unknown = set(self.parameters) - set(DEFAULTS[self.experiment])
        if unknown:
            raise ConfigError(f"unknown parameters for {self.experiment}: {sorted(unknown)}")
        merged = {**DEFAULTS[self.experiment], **self.parameters}
        for key, default in DEFAULTS[self.experiment].items():
            merged[key] = _coerce(key, merged[key], default)
        self.parameters = merged
        if self.seed is not None and (isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0):
            raise ConfigError("seed must be a non-negative integer")
        if self.threads is not None and (
            isinstance(self.threads, bool) or not isinstance(self.threads, int) or self.threads < 1
        ):
            raise ConfigError("threads must be a positive integer")
        if not isinstance(self.output_dir, str) or not self.output_dir:
            raise ConfigError("output_dir must be a non-empty string")
        _check_ranges(self.experiment, self.parameters)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"experiment": self.experiment, "output_dir": self.output_dir}
        for key in ("seed", "threads"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        out["parameters"] = dict(self.parameters)
        return out


def _coerce(key: str, value: Any, default: Any) -> Any:
    """Check ``value`` against the type of ``default``; ints are accepted for floats."""

    def scalar(v: Any, d: Any) -> Any:
        if isinstance(d, bool):
            if not isinstance(v, bool):
                raise ConfigError(f"{key} must be a boolean")
            return v
        if isinstance(d, int):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{key} must be an integer")
            return v
        if isinstance(d, float):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{key} must be a finite number")
            return float(v)
        raise AssertionError(f"unsupported default type for {key}")

    if isinstance(default, list):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{key} must be a non-empty list")
        return [scalar(v, default[0]) for v in value]
    return scalar(value, default)


def _check_ranges(name: str, p: dict[str, Any]) -> None:
    def need(cond: bool, msg: str) -> None:
        if not cond:
            raise ConfigError(msg)

    if name == "coin-info":
        need(0.0 < p["lambda_min"] < p["lambda_max"] < 1.0, "lambda range must satisfy 0 < min < max < 1")
        need(p["points"] >= 2, "points must be at least 2")
    elif name == "qubit-info":
        need(p["delta"] != 0.0, "delta must be non-zero")
        need(0.0 < p["beta_min"] < p["beta_max"], "beta range must satisfy 0 < min < max")
        need(p["points"] >= 2, "points must be at least 2")
    elif name == "two-spin":
        need(p["points"] >= 2, "points must be at least 2")
    elif name == "tfim-scaling":
        need(all(2 <= L <= 14 for L in p["sizes"]), "sizes must lie in [2, 14]")
        need(len(set(p["sizes"])) == len(p["sizes"]), "sizes must be distinct")
    elif name == "chern-sweep":
        need(p["grid"] >= 8, "grid must be at least 8")
    elif name == "bloch-geometry":
        need(p["n_polar"] >= 8 and p["n_azimuth"] >= 8, "grid resolutions must be at least 8")


def from_dict(data: dict[str, Any], experiment: Optional[str] = None) -> ExperimentConfig:
    """Build a config from parsed TOML; ``experiment`` must agree with the file if both name one."""
    unknown = set(data) - TOP_LEVEL
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if experiment is not None:
        if data.get("experiment", experiment) != experiment:
            raise ConfigError(f"config is for {data['experiment']!r}, not {experiment!r}")
        data = {**data, "experiment": experiment}
    if "experiment" not in data:
        raise ConfigError("missing required key 'experiment'")
    params = data.get("parameters", {})
    if not isinstance(params, dict):
        raise ConfigError("'parameters' must be a table")
    kwargs = {k: data[k] for k in ("output_dir", "seed", "threads") if k in data}
    return ExperimentConfig(experiment=data["experiment"], parameters=dict(params), **kwargs)


def parse_config(text: str, experiment: Optional[str] = None) -> ExperimentConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return from_dict(data, experiment)


def load_config(path: str | Path, experiment: Optional[str] = None) -> ExperimentConfig:
    """Read and validate a config file. A missing file raises ``OSError``."""
    return parse_config(Path(path).read_text(encoding="utf-8"), experiment)


def dump_config(config: ExperimentConfig) -> str:
    return tomli_w.dumps(config.to_dict())
