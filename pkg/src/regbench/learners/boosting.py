"""Gradient-boosted trees for squared loss: first-order (gbm) and second-order regularized (xgb)."""
from __future__ import annotations

import math

import numpy as np

from ..errors import InputError
from ..rng import SplitMix64
from ..stats import rmse
from .base import FittedModel, resolve_params
from .tree import RegressionTree, SplitRule, grow_tree, presort


class EnsembleModel(FittedModel):
    """``init + sum(weight * tree(x))``."""

    def __init__(self, learner, feature_names, init: float, trees, weights, params, seed=0, metadata=None):
        super().__init__(feature_names, params, seed, metadata)
        self.learner = learner
        self.init = float(init)
        self.trees: list[RegressionTree] = list(trees)
        self.weights = [float(w) for w in weights]

    def predict_matrix(self, x):
        out = np.full(x.shape[0], self.init)
        for tree, w in zip(self.trees, self.weights):
            out += w * tree.predict(x)
        return out

    def staged_predict(self, x, counts) -> dict[int, np.ndarray]:
        """Predictions of the first ``c`` trees for each ``c`` in ``counts``.

        Summation order matches ``predict_matrix``, so each stage equals the
        truncated ensemble bit for bit.
        """
        wanted = sorted({int(c) for c in counts})
        if wanted and (wanted[0] < 0 or wanted[-1] > len(self.trees)):
            raise InputError(f"stage counts must lie in [0, {len(self.trees)}]")
        out = np.full(x.shape[0], self.init)
        stages = {}
        pos = 0
        for c in wanted:
            for tree, w in zip(self.trees[pos:c], self.weights[pos:c]):
                out = out + w * tree.predict(x)
            pos = c
            stages[c] = out.copy()
        return stages

    def structure(self):
        return {"init": self.init, "weights": self.weights, "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_structure(cls, feature_names, params, seed, structure, metadata, learner="gbm"):
        trees = [RegressionTree.from_dict(t) for t in structure["trees"]]
        return cls(learner, feature_names, structure["init"], trees, structure["weights"], params, seed, metadata)


def _bag(rng: SplitMix64, n: int, fraction: float) -> np.ndarray | None:
    if fraction >= 1.0:
        return None
    k = max(1, math.ceil(fraction * n))
    return np.array(rng.sample_without_replacement(n, k), dtype=np.int64)


def fit_gbm(x: np.ndarray, y: np.ndarray, feature_names, params=None, seed=0) -> EnsembleModel:
    """Squared-error gradient boosting.

    Each tree is fitted to the current residuals on a ``ceil(bag_fraction*n)``
    subsample drawn without replacement, and added with weight ``shrinkage``.
    """
    params = resolve_params("gbm", params)
    n = x.shape[0]
    if n < 2:
        raise InputError("gbm needs at least 2 rows")
    rng = SplitMix64(seed)
    rule = SplitRule(mode="sse", max_depth=params["interaction_depth"], min_count=params["min_obs"])
    orders = presort(x)
    init = float(y.mean())
    f = np.full(n, init)
    trees, trace = [], []
    for _ in range(params["num_trees"]):
        residual = y - f
        rows = _bag(rng, n, params["bag_fraction"])
        tree = grow_tree(x, residual, None, rule, rows=rows, orders=orders)
        f = f + params["shrinkage"] * tree.predict(x)
        trees.append(tree)
        trace.append(rmse(f, y))
    model = EnsembleModel("gbm", feature_names, init, trees, [params["shrinkage"]] * len(trees), params, seed)
    model.metadata = {"iterations": len(trees), "train_rmse": trace}
    return model


def fit_xgb(x: np.ndarray, y: np.ndarray, feature_names, params=None, seed=0) -> EnsembleModel:
    """Second-order boosting with squared loss (gradient ``F - y``, unit hessian).

    The ensemble starts from ``mean(y)``; splits need strictly positive
    regularized gain and leaves take ``-G / (H + lambda)``.
    """
    params = resolve_params("xgb", params)
    n = x.shape[0]
    if n < 2:
        raise InputError("xgb needs at least 2 rows")
    rng = SplitMix64(seed)
    rule = SplitRule(mode="newton", max_depth=params["max_depth"], min_hess=params["min_child_weight"],
                     lam=params["lambda"], gamma=params["gamma"])
    orders = presort(x)
    hess = np.ones(n)
    init = float(y.mean())
    f = np.full(n, init)
    trees, trace = [], []
    for _ in range(params["num_trees"]):
        grad = f - y
        rows = _bag(rng, n, params["subsample"])
        # the builder accumulates -g so that leaf values come out as -G/(H+lambda)
        tree = grow_tree(x, -grad, hess, rule, rows=rows, orders=orders)
        f = f + params["eta"] * tree.predict(x)
        trees.append(tree)
        trace.append(rmse(f, y))
    model = EnsembleModel("xgb", feature_names, init, trees, [params["eta"]] * len(trees), params, seed)
    model.metadata = {"iterations": len(trees), "train_rmse": trace}
    return model
