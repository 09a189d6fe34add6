"""Learner configuration, fitted-model base class and JSON model files."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import InputError

SCHEMA_VERSION = 1
LEARNERS = ("linear", "glm", "cart", "earth", "gbm", "xgb")

# name -> (default, kind, check)
_PARAM_SPECS: dict[str, dict[str, tuple]] = {
    "linear": {},
    "glm": {"family": ("gaussian", str, lambda v: v in ("gaussian", "poisson"))},
    "cart": {
        "max_depth": (30, int, lambda v: v >= 1),
        "min_obs": (20, int, lambda v: v >= 1),
        "min_improve": (0.01, float, lambda v: v >= 0),
    },
    "earth": {
        "max_terms": (21, int, lambda v: v >= 3),
        "max_degree": (1, int, lambda v: v >= 1),
        "penalty": (2.0, float, lambda v: v >= 0),
        "max_knots": (128, int, lambda v: v >= 2),
    },
    "gbm": {
        "num_trees": (100, int, lambda v: v >= 1),
        "interaction_depth": (1, int, lambda v: v >= 1),
        "shrinkage": (0.1, float, lambda v: 0 < v <= 1),
        "min_obs": (10, int, lambda v: v >= 1),
        "bag_fraction": (0.5, float, lambda v: 0 < v <= 1),
    },
    "xgb": {
        "num_trees": (100, int, lambda v: v >= 1),
        "max_depth": (6, int, lambda v: v >= 1),
        "eta": (0.3, float, lambda v: 0 < v <= 1),
        "lambda": (1.0, float, lambda v: v >= 0),
        "gamma": (0.0, float, lambda v: v >= 0),
        "min_child_weight": (1.0, float, lambda v: v >= 0),
        "subsample": (1.0, float, lambda v: 0 < v <= 1),
    },
}


def default_params(learner: str) -> dict[str, Any]:
    return {k: spec[0] for k, spec in _PARAM_SPECS[learner].items()}


def resolve_params(learner: str, params: dict | None) -> dict[str, Any]:
    if learner not in _PARAM_SPECS:
        raise InputError(f"unknown learner {learner!r}; expected one of {LEARNERS}")
    specs = _PARAM_SPECS[learner]
    params = dict(params or {})
    unknown = sorted(set(params) - set(specs))
    if unknown:
        raise InputError(f"{learner}: unknown parameters {unknown}")
    out = {}
    for name, (default, kind, check) in specs.items():
        value = params.get(name, default)
        if kind is int:
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise InputError(f"{learner}.{name} must be an integer, got {value!r}")
            value = int(float(value))
        elif kind is float:
            value = float(value)
            if not math.isfinite(value):
                raise InputError(f"{learner}.{name} must be finite")
        if not check(value):
            raise InputError(f"{learner}.{name}={value!r} is out of range")
        out[name] = value
    return out


@dataclass(frozen=True)
class LearnerConfig:
    """A learner tag plus a full hyperparameter assignment.

    ``label`` names the config in reports; it defaults to the learner tag.
    """

    learner: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "params", resolve_params(self.learner, self.params))
        object.__setattr__(self, "seed", int(self.seed) & ((1 << 64) - 1))

    @property
    def name(self) -> str:
        return self.label or self.learner

    def key(self) -> str:
        return json.dumps({"learner": self.learner, "params": self.params, "seed": self.seed}, sort_keys=True)

    def to_dict(self) -> dict:
        d = {"learner": self.learner, "params": dict(self.params), "seed": self.seed}
        if self.label:
            d["label"] = self.label
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LearnerConfig":
        return cls(d["learner"], d.get("params", {}), d.get("seed", 0), d.get("label"))


class FittedModel:
    """Base class: features are bound by name, so column order at predict time is irrelevant."""

    learner: str = ""

    def __init__(self, feature_names, params: dict, seed: int = 0, metadata: dict | None = None):
        self.feature_names = list(feature_names)
        self.params = dict(params)
        self.seed = seed
        self.metadata = dict(metadata or {})

    def predict_matrix(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, table) -> np.ndarray:
        missing = [n for n in self.feature_names if n not in table.column_names]
        if missing:
            raise InputError(f"table lacks feature column {missing[0]!r}")
        return self.predict_matrix(table.matrix(self.feature_names))

    def structure(self) -> dict:
        raise NotImplementedError

    @classmethod
    def from_structure(cls, feature_names, params, seed, structure, metadata):
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "learner": self.learner,
            "params": self.params,
            "seed": self.seed,
            "features": self.feature_names,
            "metadata": self.metadata,
            "structure": self.structure(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, allow_nan=False)
