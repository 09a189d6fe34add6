"""Six regression learners behind one fit/predict interface."""
from __future__ import annotations

import json
from typing import Sequence

import numpy as np

from ..errors import InputError
from .base import LEARNERS, SCHEMA_VERSION, FittedModel, LearnerConfig, default_params, resolve_params
from .boosting import EnsembleModel, fit_gbm, fit_xgb
from .cart import CartModel, fit_cart
from .linear import GlmModel, LinearModel, fit_glm, fit_linear
from .mars import MarsModel, fit_mars

FITTERS = {
    "linear": fit_linear,
    "glm": fit_glm,
    "cart": fit_cart,
    "earth": fit_mars,
    "gbm": fit_gbm,
    "xgb": fit_xgb,
}


def feature_columns(table, response: str, features: Sequence[str] | None = None) -> list[str]:
    if response not in table.column_names:
        raise InputError(f"response column {response!r} not in table")
    if features is None:
        return [n for n in table.column_names if n != response]
    if response in features:
        raise InputError("response cannot also be a feature")
    for f in features:
        table.column(f)
    return list(features)


def fit(config: LearnerConfig, table, response: str, features: Sequence[str] | None = None) -> FittedModel:
    names = feature_columns(table, response, features)
    if not names:
        raise InputError("no feature columns to fit on")
    x = table.matrix(names)
    y = np.asarray(table.column(response))
    return FITTERS[config.learner](x, y, names, config.params, config.seed)


def predict(model: FittedModel, table) -> np.ndarray:
    return model.predict(table)


def model_from_dict(d: dict) -> FittedModel:
    if d.get("schema_version") != SCHEMA_VERSION:
        raise InputError(f"unsupported model schema_version {d.get('schema_version')!r}")
    learner = d["learner"]
    params = resolve_params(learner, d["params"])
    args = (d["features"], params, d["seed"], d["structure"], d.get("metadata", {}))
    if learner in ("gbm", "xgb"):
        return EnsembleModel.from_structure(*args, learner=learner)
    cls = {"linear": LinearModel, "glm": GlmModel, "cart": CartModel, "earth": MarsModel}[learner]
    return cls.from_structure(*args)


def load_model(text: str) -> FittedModel:
    return model_from_dict(json.loads(text))


__all__ = [
    "LEARNERS", "FITTERS", "FittedModel", "LearnerConfig", "default_params", "resolve_params",
    "fit", "predict", "load_model", "model_from_dict", "feature_columns",
    "fit_linear", "fit_glm", "fit_cart", "fit_mars", "fit_gbm", "fit_xgb",
]
