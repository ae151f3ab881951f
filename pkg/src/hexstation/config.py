"""Experiment configuration and its JSON form (``hexstation-config/1``)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

SCHEMA = "hexstation-config/1"

REGION_METHODS = ("CC", "SA", "ST", "AT")
NEIGHBOURHOOD_METHODS = ("concatenate", "average", "diminishing", "diminishing_squared")
SCALERS = ("none", "minmax", "standard")
CLASSIFIERS = ("knn", "random_forest", "adaboost", "mlp", "plugin")
BALANCE_MODES = ("normal", "balanced", "balanced_subsample")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Full hyperparameter tuple of one experiment.

    Defaults are the final setting: resolution 11, five neighbourhood rings,
    category counting, squared diminishing averaging, min-max scaling,
    imbalance ratio 2.5 and a random forest.
    """

    resolution: int = 11
    neighbourhood_K: int = 5
    region_method: str = "CC"
    neighbourhood_method: str = "diminishing_squared"
    scaler: str = "minmax"
    imbalance_ratio: float = 2.5
    classifier: str = "random_forest"
    class_balance_mode: str = "normal"
    iterations: int = 10
    seed: int = 0
    encoder_dim: Optional[int] = None
    plugin: Optional[str] = None
    threshold: float = 0.5

    def __post_init__(self):
        def choice(name, allowed):
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")

        if not isinstance(self.resolution, int) or not 0 <= self.resolution <= 15:
            raise ConfigError(f"resolution must be an integer in 0..15, got {self.resolution!r}")
        if not isinstance(self.neighbourhood_K, int) or self.neighbourhood_K < 0:
            raise ConfigError("neighbourhood_K must be a non-negative integer")
        choice("region_method", REGION_METHODS)
        choice("neighbourhood_method", NEIGHBOURHOOD_METHODS)
        choice("scaler", SCALERS)
        choice("classifier", CLASSIFIERS)
        choice("class_balance_mode", BALANCE_MODES)
        if not self.imbalance_ratio >= 1:
            raise ConfigError(f"imbalance_ratio must be >= 1, got {self.imbalance_ratio}")
        if not isinstance(self.iterations, int) or self.iterations < 1:
            raise ConfigError("iterations must be a positive integer")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.encoder_dim is not None and (not isinstance(self.encoder_dim, int) or self.encoder_dim < 1):
            raise ConfigError("encoder_dim must be a positive integer")
        if self.classifier == "plugin" and not self.plugin:
            raise ConfigError("classifier 'plugin' needs a plugin name")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError("threshold must lie in [0, 1]")

    @property
    def region_key(self) -> str:
        return self.region_method if self.encoder_dim is None else f"{self.region_method}{self.encoder_dim}"

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, **asdict(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        schema = d.pop("schema", SCHEMA)
        if schema != SCHEMA:
            raise ConfigError(f"unsupported config schema {schema!r}")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "imbalance_ratio" in d:
            d["imbalance_ratio"] = float(d["imbalance_ratio"])
        return cls(**d)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise FileNotFoundError(f"cannot read config {path}: {e.strerror}") from None
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e.msg} at line {e.lineno})") from None

    def dump(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


def derive_seed(*parts: int) -> int:
    """32-bit seed derived from a tuple of integers (e.g. config seed, iteration)."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])
