"""Binary regression trees grown by exhaustive split search over presorted features.

One builder serves three learners. In ``sse`` mode the split score is the
reduction in sum of squared errors and leaves hold the node mean (CART and
gbm). In ``newton`` mode the score is the second-order regularized gain
``0.5 * [G_L^2/(H_L+lam) + G_R^2/(H_R+lam) - G^2/(H+lam)] - gamma`` and
leaves hold ``-G/(H+lam)`` (xgb).

Split thresholds are midpoints between consecutive distinct sorted values;
a row goes left when ``x <= threshold``. Gains within ``TIE_RTOL`` of the
best are ties, resolved by lowest feature index then lowest threshold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TIE_RTOL = 1e-12
# sse-mode gains this small relative to node SSE are rounding noise
NOISE_RTOL = 1e-13
LEAF = -1


@dataclass
class RegressionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == LEAF))

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max()) if self.n_nodes else 0

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``x``."""
        node = np.zeros(x.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            cur = node[active]
            f = self.feature[cur]
            go_left = x[active, f] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.value[self.apply(x)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": [float(v) for v in self.value],
            "count": self.count.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(
            np.array(d["feature"], dtype=np.int64),
            np.array(d["threshold"], dtype=np.float64),
            np.array(d["left"], dtype=np.int64),
            np.array(d["right"], dtype=np.int64),
            np.array(d["value"], dtype=np.float64),
            np.array(d["count"], dtype=np.int64),
        )


@dataclass(frozen=True)
class SplitRule:
    mode: str = "sse"  # "sse" or "newton"
    max_depth: int = 30
    min_count: int = 1
    min_hess: float = 0.0
    min_gain: float = 0.0  # sse mode: absolute SSE reduction required
    lam: float = 0.0
    gamma: float = 0.0


def presort(x: np.ndarray) -> np.ndarray:
    """Row indices sorted by each feature: shape (n_features, n_rows)."""
    return np.argsort(x, axis=0, kind="mergesort").T.copy()


def best_split(x, target, hess, orders, rule: SplitRule):
    """Best split of the rows in ``orders`` (one ascending index row per feature).

    Returns ``(gain, feature, threshold)`` or ``None`` when no admissible
    split has positive gain.
    """
    d, n = orders.shape
    if n < 2 or n < 2 * rule.min_count:
        return None
    xs = x[orders, np.arange(d)[:, None]]
    n_left = np.arange(1, n)
    ok = (xs[:, 1:] > xs[:, :-1]) & (n_left >= rule.min_count) & (n - n_left >= rule.min_count)
    ts = target[orders]
    if rule.mode == "sse":
        cl = np.cumsum(ts - ts[0].mean(), axis=1)[:, :-1]
        gains = cl * cl * (n / (n_left * (n - n_left)))
    else:
        hs = hess[orders]
        g_total = ts[0].sum()
        h_total = hs[0].sum()
        parent = g_total * g_total / (h_total + rule.lam)
        gl = np.cumsum(ts, axis=1)[:, :-1]
        hl = np.cumsum(hs, axis=1)[:, :-1]
        gr = g_total - gl
        hr = h_total - hl
        if rule.min_hess > 0:
            ok &= (hl >= rule.min_hess) & (hr >= rule.min_hess)
        gains = 0.5 * (gl * gl / (hl + rule.lam) + gr * gr / (hr + rule.lam) - parent) - rule.gamma
    gains = np.where(ok, gains, -np.inf)
    best = gains.max()
    if not np.isfinite(best) or best <= 0.0:
        return None
    # row-major argmax of the tie mask = lowest feature, then lowest threshold
    flat = int(np.argmax(gains >= best - TIE_RTOL * abs(best)))
    f, i = divmod(flat, n - 1)
    lo, hi = xs[f, i], xs[f, i + 1]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return float(gains[f, i]), int(f), float(thr)


def grow_tree(x: np.ndarray, target: np.ndarray, hess: np.ndarray | None, rule: SplitRule,
              rows: np.ndarray | None = None, orders: np.ndarray | None = None) -> RegressionTree:
    """Grow a tree depth-first on ``rows`` (default: all rows).

    ``orders`` may carry global presorted indices (from :func:`presort`); they
    are filtered to ``rows`` here so presorting can be shared across trees.
    """
    n_total = x.shape[0]
    if hess is None:
        hess = np.ones(n_total)
    if orders is None:
        orders = presort(x)
    if rows is not None:
        member = np.zeros(n_total, dtype=bool)
        member[rows] = True
        orders = orders[member[orders]].reshape(orders.shape[0], -1)

    feature, threshold, left, right, value, count = [], [], [], [], [], []

    def leaf_value(idx):
        if rule.mode == "sse":
            return float(target[idx].mean())
        return float(target[idx].sum() / (hess[idx].sum() + rule.lam))

    def build(node_orders, depth):
        node = len(feature)
        idx = node_orders[0]
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(leaf_value(idx))
        count.append(int(idx.size))
        if depth >= rule.max_depth:
            return node
        split = best_split(x, target, hess, node_orders, rule)
        if split is None:
            return node
        gain, f, thr = split
        if rule.mode == "sse":
            resid = target[idx] - target[idx].mean()
            if gain < rule.min_gain or gain <= NOISE_RTOL * float(resid @ resid):
                return node
        goes_left = np.zeros(n_total, dtype=bool)
        goes_left[idx] = x[idx, f] <= thr
        mask = goes_left[node_orders]
        d = node_orders.shape[0]
        left_orders = node_orders[mask].reshape(d, -1)
        right_orders = node_orders[~mask].reshape(d, -1)
        feature[node] = f
        threshold[node] = thr
        left[node] = build(left_orders, depth + 1)
        right[node] = build(right_orders, depth + 1)
        return node

    build(orders, 0)
    return RegressionTree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
        np.array(count, dtype=np.int64),
    )
