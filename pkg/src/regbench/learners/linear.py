"""Ordinary least squares and IRLS generalized linear models."""
from __future__ import annotations

import numpy as np

from ..errors import ConvergenceError, InputError
from ..stats import qr_solve, rmse
from .base import FittedModel, resolve_params

MAX_ITER = 50
COEF_TOL = 1e-8


class LinearModel(FittedModel):
    learner = "linear"

    def __init__(self, feature_names, coefficients, params=None, seed=0, metadata=None):
        super().__init__(feature_names, params or {}, seed, metadata)
        self.coefficients = np.asarray(coefficients, dtype=np.float64)

    def linear_predictor(self, x: np.ndarray) -> np.ndarray:
        return self.coefficients[0] + x @ self.coefficients[1:]

    def predict_matrix(self, x):
        return self.linear_predictor(x)

    def structure(self):
        return {"coefficients": [float(c) for c in self.coefficients]}

    @classmethod
    def from_structure(cls, feature_names, params, seed, structure, metadata):
        return cls(feature_names, structure["coefficients"], params, seed, metadata)


class GlmModel(LinearModel):
    learner = "glm"

    def predict_matrix(self, x):
        eta = self.linear_predictor(x)
        if self.params["family"] == "poisson":
            return np.exp(eta)
        return eta


def _design(x: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(x.shape[0]), x])


def fit_linear(x: np.ndarray, y: np.ndarray, feature_names, params=None, seed=0) -> LinearModel:
    design = _design(x)
    beta = qr_solve(design, y, ["intercept"] + list(feature_names))
    model = LinearModel(feature_names, beta, resolve_params("linear", params), seed)
    model.metadata = {"iterations": 1, "train_rmse": [rmse(model.predict_matrix(x), y)]}
    return model


def _poisson_deviance(y, mu):
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(y / mu), 0.0)
    return float(2.0 * np.sum(term - (y - mu)))


def fit_glm(x: np.ndarray, y: np.ndarray, feature_names, params=None, seed=0) -> GlmModel:
    """IRLS until the largest coefficient change drops below 1e-8 (at most 50 sweeps).

    The gaussian family has unit weights and working response ``y``, so every
    sweep solves the same least-squares problem as :func:`fit_linear` and the
    coefficients agree bit for bit.
    """
    params = resolve_params("glm", params)
    names = ["intercept"] + list(feature_names)
    design = _design(x)
    poisson = params["family"] == "poisson"
    if poisson and np.any(y < 0):
        raise InputError("poisson family requires a nonnegative response")

    if poisson:
        mu = y + 0.1
        eta = np.log(mu)
    beta = None
    deviance = np.inf
    rising = 0
    iterations = 0
    for iterations in range(1, MAX_ITER + 1):
        if poisson:
            z = eta + (y - mu) / mu
            sw = np.sqrt(mu)
        else:
            z = y
            sw = np.ones_like(y)
        new_beta = qr_solve(design * sw[:, None], z * sw, names)
        if poisson:
            eta = design @ new_beta
            mu = np.exp(eta)
            new_dev = _poisson_deviance(y, mu)
        else:
            r = y - design @ new_beta
            new_dev = float(r @ r)
        rising = rising + 1 if new_dev > deviance else 0
        if rising >= 3:
            raise ConvergenceError(f"IRLS deviance increased for 3 consecutive iterations (at {iterations})")
        deviance = new_dev
        change = np.inf if beta is None else float(np.max(np.abs(new_beta - beta)))
        beta = new_beta
        if change < COEF_TOL:
            break
    model = GlmModel(feature_names, beta, params, seed)
    model.metadata = {"iterations": iterations, "deviance": deviance,
                      "train_rmse": [rmse(model.predict_matrix(x), y)]}
    return model
