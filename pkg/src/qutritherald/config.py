"""Run configuration: JSON file + command-line overrides, validated up front."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cache
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .analysis import optimal_tau
from .atom_cavity import SystemParams
from .errors import PreconditionError
from .optics import SplitterAngle, canonical_theta
from .protocol import GOLDEN_SEQUENCE, ClickSequence

DEFAULT_PARAMS = {"lambda_L": 10.0, "lambda_R": 10.0, "kappa": 1.0, "gamma_l": 0.1, "gamma_r": 0.1}

DEFAULT_GRIDS = {
    "amplitudes": (0.0, 0.5, 501),
    "sweep": (0.0, 0.5, 1000),
    "fidelity-scan:theta": (0.0, 1.5, 301),
    "fidelity-scan:ratio": (0.5, 2.0, 301),
}


class ConfigError(ValueError):
    """Invalid configuration or flags (exit code 2)."""


@cache
def schema() -> dict[str, Any]:
    text = resources.files("qutritherald").joinpath("config_schema.json").read_text()
    return json.loads(text)


def validate(doc: dict[str, Any]) -> None:
    try:
        jsonschema.validate(doc, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None


@dataclass(frozen=True)
class RunConfig:
    params: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_PARAMS))
    series: tuple[dict[str, float], ...] | None = None
    theta: float | str = "canonical"
    taus: tuple[float, ...] | str = "optimal"
    seed: int = 0
    output_path: str | None = None
    output_format: str = "csv"
    sequence: tuple[str, ...] = tuple(d.value for d in GOLDEN_SEQUENCE)
    grid: tuple[float, float, int] | None = None
    n_traj: int = 10000
    t_max: float | None = None
    axis: str = "theta"
    eta: float = 1.0

    # -- (de)serialization ----------------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> RunConfig:
        validate(doc)
        kw: dict[str, Any] = {}
        if "params" in doc:
            kw["params"] = {**DEFAULT_PARAMS, **{k: float(v) for k, v in doc["params"].items()}}
        if "series" in doc:
            kw["series"] = tuple({k: float(v) for k, v in s.items()} for s in doc["series"])
        if "theta" in doc:
            kw["theta"] = doc["theta"] if doc["theta"] == "canonical" else float(doc["theta"])
        if "taus" in doc:
            t = doc["taus"]
            kw["taus"] = t if t == "optimal" else tuple(float(x) for x in (t if isinstance(t, list) else [t] * 4))
        for key in ("seed", "n_traj"):
            if key in doc:
                kw[key] = int(doc[key])
        if "output" in doc:
            kw["output_path"] = doc["output"].get("path")
            kw["output_format"] = doc["output"].get("format", "csv")
        if "sequence" in doc:
            kw["sequence"] = tuple(doc["sequence"])
        if "grid" in doc:
            g = doc["grid"]
            kw["grid"] = (float(g["start"]), float(g["stop"]), int(g["count"]))
        if doc.get("t_max") is not None:
            kw["t_max"] = float(doc["t_max"])
        if "axis" in doc:
            kw["axis"] = doc["axis"]
        if "eta" in doc:
            kw["eta"] = float(doc["eta"])
        cfg = cls(**kw)
        cfg.system_params()  # physical invariants (e.g. lambda_L^2 + lambda_R^2 > 0)
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "params": dict(self.params),
            "theta": self.theta,
            "taus": self.taus if isinstance(self.taus, str) else list(self.taus),
            "seed": self.seed,
            "output": {"path": self.output_path, "format": self.output_format},
            "sequence": list(self.sequence),
            "n_traj": self.n_traj,
            "t_max": self.t_max,
            "axis": self.axis,
            "eta": self.eta,
        }
        if self.series is not None:
            doc["series"] = [dict(s) for s in self.series]
        if self.grid is not None:
            doc["grid"] = {"start": self.grid[0], "stop": self.grid[1], "count": self.grid[2]}
        return doc

    def with_overrides(self, **changes: Any) -> RunConfig:
        """New config with non-None overrides applied, re-validated."""
        changes = {k: v for k, v in changes.items() if v is not None}
        return RunConfig.from_dict(replace(self, **changes).to_dict())

    # -- resolved values ------------------------------------------------------

    def system_params(self, overrides: dict[str, float] | None = None) -> SystemParams:
        try:
            return SystemParams(**{**self.params, **(overrides or {})})
        except PreconditionError as exc:
            raise ConfigError(str(exc)) from None

    def all_series(self) -> list[SystemParams]:
        if self.series is None:
            return [self.system_params()]
        return [self.system_params(s) for s in self.series]

    def angle(self) -> SplitterAngle:
        return SplitterAngle(canonical_theta() if self.theta == "canonical" else float(self.theta))

    def click_sequence(self) -> ClickSequence:
        try:
            return ClickSequence(self.sequence)
        except PreconditionError as exc:
            raise ConfigError(str(exc)) from None

    def resolved_taus(self, p: SystemParams | None = None) -> tuple[float, ...]:
        """Four evolution times; 'optimal' needs the underdamped regime (DomainError otherwise)."""
        if self.taus == "optimal":
            return (optimal_tau(p or self.system_params()),) * 4
        return tuple(self.taus)

    def resolved_grid(self, key: str) -> tuple[float, float, int]:
        return self.grid if self.grid is not None else DEFAULT_GRIDS[key]


def parse_grid(text: str) -> tuple[float, float, int]:
    """'start:stop:count' -> tuple; count must be >= 1."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must look like start:stop:count, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"bad grid {text!r}") from None
    if count < 1:
        raise ConfigError(f"grid {text!r} is empty")
    return start, stop, count
