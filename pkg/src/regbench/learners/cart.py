"""Single CART regression tree (no cost-complexity pruning)."""
from __future__ import annotations

import numpy as np

from ..errors import InputError
from ..stats import rmse
from .base import FittedModel, resolve_params
from .tree import RegressionTree, SplitRule, grow_tree


class CartModel(FittedModel):
    learner = "cart"

    def __init__(self, feature_names, tree: RegressionTree, params, seed=0, metadata=None):
        super().__init__(feature_names, params, seed, metadata)
        self.tree = tree

    def predict_matrix(self, x):
        return self.tree.predict(x)

    def structure(self):
        return {"tree": self.tree.to_dict()}

    @classmethod
    def from_structure(cls, feature_names, params, seed, structure, metadata):
        return cls(feature_names, RegressionTree.from_dict(structure["tree"]), params, seed, metadata)


def fit_cart(x: np.ndarray, y: np.ndarray, feature_names, params=None, seed=0) -> CartModel:
    """Greedy SSE-minimizing tree.

    ``min_improve`` is relative: a split must reduce SSE by at least
    ``min_improve`` times the root SSE (the rpart ``cp`` convention).
    """
    params = resolve_params("cart", params)
    n = x.shape[0]
    if n < 2 * params["min_obs"]:
        raise InputError(f"cart needs at least {2 * params['min_obs']} rows, got {n}")
    centered = y - y.mean()
    root_sse = float(centered @ centered)
    rule = SplitRule(mode="sse", max_depth=params["max_depth"], min_count=params["min_obs"],
                     min_gain=params["min_improve"] * root_sse)
    tree = grow_tree(x, y, None, rule)
    model = CartModel(feature_names, tree, params, seed)
    model.metadata = {"iterations": 1, "n_leaves": tree.n_leaves, "train_rmse": [rmse(tree.predict(x), y)]}
    return model
