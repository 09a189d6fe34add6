"""Multivariate adaptive regression splines: greedy forward pass, GCV-driven backward pruning."""
from __future__ import annotations

import logging

import numpy as np
from scipy.linalg import solve_triangular

from ..stats import rmse
from .base import FittedModel, resolve_params

log = logging.getLogger(__name__)

FORWARD_THRESHOLD = 1e-4
_ZERO_RTOL = 1e-10


def hinge_product(x: np.ndarray, factors) -> np.ndarray:
    """Evaluate prod(max(0, direction * (x[:, feature] - knot))) over ``factors``."""
    out = np.ones(x.shape[0])
    for feature, knot, direction in factors:
        out = out * np.maximum(0.0, direction * (x[:, feature] - knot))
    return out


def gcv(sse: float, n: int, n_terms: int, penalty: float) -> float:
    """SSE/n / (1 - C/n)^2 with C = n_terms + penalty * (n_terms - 1) / 2."""
    effective = n_terms + penalty * (n_terms - 1) / 2.0
    if effective >= n:
        return np.inf
    return (sse / n) / (1.0 - effective / n) ** 2


class MarsModel(FittedModel):
    learner = "earth"

    def __init__(self, feature_names, bases, coefficients, params, seed=0, metadata=None):
        super().__init__(feature_names, params, seed, metadata)
        # bases[0] is the constant term (no factors)
        self.bases = [[(int(f), float(t), int(d)) for f, t, d in b] for b in bases]
        self.coefficients = np.asarray(coefficients, dtype=np.float64)

    def basis_matrix(self, x):
        return np.column_stack([hinge_product(x, b) for b in self.bases])

    def predict_matrix(self, x):
        return self.basis_matrix(x) @ self.coefficients

    def structure(self):
        return {
            "bases": [[[f, t, d] for f, t, d in b] for b in self.bases],
            "coefficients": [float(c) for c in self.coefficients],
        }

    @classmethod
    def from_structure(cls, feature_names, params, seed, structure, metadata):
        return cls(feature_names, structure["bases"], structure["coefficients"], params, seed, metadata)


def candidate_knots(values: np.ndarray, cap: int) -> np.ndarray:
    """Distinct values, thinned to ``cap`` evenly spaced order statistics when there are more."""
    distinct = np.unique(values)
    if distinct.size > cap:
        pick = np.unique(np.round(np.linspace(0, distinct.size - 1, cap)).astype(np.int64))
        distinct = distinct[pick]
    return distinct


def _orthogonalize(cols: np.ndarray, q: np.ndarray) -> np.ndarray:
    cols = cols - q @ (q.T @ cols)
    return cols - q @ (q.T @ cols)


def _combine(aa, bb, ab, ru, rd, uu, dd):
    """SSE reduction of adding the up hinge, the down hinge, or both.

    ``aa``/``bb``/``ab`` are inner products of the hinges after projecting out
    the current basis, ``uu``/``dd`` their raw squared norms and ``ru``/``rd``
    inner products with the residual.
    """
    a_ok = aa > _ZERO_RTOL * np.maximum(uu, 1e-300)
    b_ok = bb > _ZERO_RTOL * np.maximum(dd, 1e-300)
    red_a = np.where(a_ok, ru * ru / np.where(a_ok, aa, 1.0), 0.0)
    red_b = np.where(b_ok, rd * rd / np.where(b_ok, bb, 1.0), 0.0)
    det = aa * bb - ab * ab
    pair_ok = a_ok & b_ok & (det > _ZERO_RTOL * aa * bb)
    safe_det = np.where(pair_ok, det, 1.0)
    red_pair = np.where(pair_ok, (bb * ru * ru - 2 * ab * ru * rd + aa * rd * rd) / safe_det, 0.0)
    return np.maximum(red_pair, np.maximum(red_a, red_b))


def _suffix_at(a: np.ndarray, k: np.ndarray) -> np.ndarray:
    """``a[k_j:].sum(axis=0)`` for every nondecreasing start ``k_j`` in one pass over ``a``."""
    n = a.shape[0]
    out = np.zeros((k.size,) + a.shape[1:])
    live = k < n
    if not live.any():
        return out
    bounds = np.unique(k[live])
    seg = np.add.reduceat(a, bounds, axis=0)
    suffix = np.cumsum(seg[::-1], axis=0)[::-1]
    out[live] = suffix[np.searchsorted(bounds, k[live])]
    return out


def _scan_knots(xs, ps, qs, rs, knots):
    """Approximate reductions for every knot at once from running sums over rows sorted by x.

    For knot t the up hinge covers rows with x > t (a suffix) and the down hinge
    rows with x <= t (the complementary prefix), so every inner product is a
    difference of cumulative sums. Cancellation can blur near-degenerate
    candidates; the caller re-scores the front runners exactly.
    """
    k = np.searchsorted(xs, knots, side="right")
    t = knots
    m = qs.shape[1]
    p2 = ps * ps
    qp = qs * ps[:, None]
    stacked = np.column_stack([p2, p2 * xs, p2 * xs * xs, rs * ps, rs * ps * xs, qp, qp * xs[:, None]])
    suf = _suffix_at(stacked, k)
    pre = stacked.sum(axis=0) - suf
    uu = np.maximum(0.0, suf[:, 2] - 2 * t * suf[:, 1] + t * t * suf[:, 0])
    dd = np.maximum(0.0, pre[:, 2] - 2 * t * pre[:, 1] + t * t * pre[:, 0])
    ru = suf[:, 4] - t * suf[:, 3]
    rd = t * pre[:, 3] - pre[:, 4]
    qu = suf[:, 5 + m:] - t[:, None] * suf[:, 5:5 + m]
    qd = t[:, None] * pre[:, 5:5 + m] - pre[:, 5 + m:]
    aa = uu - np.einsum("ij,ij->i", qu, qu)
    bb = dd - np.einsum("ij,ij->i", qd, qd)
    ab = -np.einsum("ij,ij->i", qu, qd)  # raw up/down hinges have disjoint support
    return _combine(aa, bb, ab, ru, rd, uu, dd)


def _exact_reduction(x, pcol, v, t, q, resid) -> float:
    diff = x[:, v] - t
    up = pcol * np.maximum(0.0, diff)
    down = pcol * np.maximum(0.0, -diff)
    a = _orthogonalize(up[:, None], q)[:, 0]
    b = _orthogonalize(down[:, None], q)[:, 0]
    red = _combine(np.array([a @ a]), np.array([b @ b]), np.array([a @ b]), np.array([resid @ up]),
                   np.array([resid @ down]), np.array([up @ up]), np.array([down @ down]))
    return float(red[0])


# candidates re-scored exactly per step
RESCORE = 8


def _forward(x, y, max_terms, max_degree, max_knots):
    n, d = x.shape
    # centering keeps the running sums well conditioned; hinges are shift invariant
    center = x.mean(axis=0)
    xc = x - center
    orders = [np.argsort(xc[:, v], kind="mergesort") for v in range(d)]
    bases: list[list] = [[]]
    columns = [np.ones(n)]
    q = (columns[0] / np.sqrt(n))[:, None]
    resid = y - q @ (q.T @ y)
    sst = float(resid @ resid)
    sse = sst
    history = [sse]
    while len(bases) + 2 <= max_terms and sse > 0 and sst > 0:
        reds, meta = [], []  # per (parent, feature): approximate reductions, (parent, feature, knots)
        for m, parent in enumerate(bases):
            if len(parent) >= max_degree:
                continue
            used = {f for f, _, _ in parent}
            pcol = columns[m]
            for v in range(d):
                if v in used:
                    continue
                order = orders[v][pcol[orders[v]] != 0]
                if order.size == 0:
                    continue
                knots = candidate_knots(x[order, v], max_knots)
                red = _scan_knots(xc[order, v], pcol[order], q[order], resid[order], knots - center[v])
                reds.append(red)
                meta.append((m, v, knots))
        if not reds:
            break
        flat = np.concatenate(reds)
        owner = np.repeat(np.arange(len(reds)), [r.size for r in reds])
        offset = np.concatenate([[0], np.cumsum([r.size for r in reds])])
        # exact re-scoring of the front runners, visited in enumeration order
        front = np.sort(np.argsort(-flat, kind="stable")[:RESCORE])
        best = None
        for i in front:
            if flat[i] <= 0:
                continue
            m, v, knots = meta[owner[i]]
            t = float(knots[i - offset[owner[i]]])
            exact = _exact_reduction(x, columns[m], v, t, q, resid)
            if best is None or exact > best[0]:
                best = (exact, m, v, t)
        if best is None or best[0] / sst < FORWARD_THRESHOLD:
            break
        _, m, v, t = best
        parent = bases[m]
        added = False
        for direction in (1, -1):
            factors = parent + [(v, t, direction)]
            col = hinge_product(x, factors)
            raw = float(col @ col)
            ortho = _orthogonalize(col[:, None], q)[:, 0]
            norm2 = float(ortho @ ortho)
            if raw == 0.0 or norm2 <= _ZERO_RTOL * raw:
                continue
            bases.append(factors)
            columns.append(col)
            q = np.column_stack([q, ortho / np.sqrt(norm2)])
            added = True
        if not added:
            break
        resid = y - q @ (q.T @ y)
        sse = float(resid @ resid)
        history.append(sse)
    return bases, np.column_stack(columns), history


def _rss(design: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    r = y - design @ coef
    return float(r @ r), coef


def _drop_costs(design: np.ndarray, y: np.ndarray) -> np.ndarray:
    """RSS increase from deleting each column: b_j^2 / [(X'X)^-1]_jj, from one QR."""
    q, r = np.linalg.qr(design, mode="reduced")
    coef = solve_triangular(r, q.T @ y)
    r_inv = solve_triangular(r, np.eye(r.shape[0]))
    return coef * coef / np.einsum("ij,ij->i", r_inv, r_inv)


def _backward(design, y, penalty):
    """Drop one term at a time (never the intercept), keeping the subset with the lowest GCV."""
    n, m = design.shape
    current = list(range(m))
    sse, _ = _rss(design, y)
    best_gcv = gcv(sse, n, m, penalty)
    best_set = list(current)
    full_gcv = best_gcv
    while len(current) > 1:
        costs = _drop_costs(design[:, current], y)
        drop = current[1 + int(np.argmin(costs[1:]))]
        current = [c for c in current if c != drop]
        s, _ = _rss(design[:, current], y)
        score = gcv(s, n, len(current), penalty)
        if score <= best_gcv:
            best_gcv, best_set = score, list(current)
    return best_set, best_gcv, full_gcv


def fit_mars(x: np.ndarray, y: np.ndarray, feature_names, params=None, seed=0) -> MarsModel:
    params = resolve_params("earth", params)
    n = x.shape[0]
    bases, design, history = _forward(x, y, params["max_terms"], params["max_degree"], params["max_knots"])
    penalty = params["penalty"]
    if not np.isfinite(gcv(history[-1], n, len(bases), penalty)):
        log.warning("earth: %d terms exceed the effective-parameter budget for %d rows; pruning", len(bases), n)
    keep, best_gcv, full_gcv = _backward(design, y, penalty)
    _, coef = _rss(design[:, keep], y)
    model = MarsModel(feature_names, [bases[i] for i in keep], coef, params, seed)
    model.metadata = {
        "forward_terms": len(bases),
        "forward_sse": history,
        "gcv": best_gcv if np.isfinite(best_gcv) else None,
        "full_gcv": full_gcv if np.isfinite(full_gcv) else None,
        "train_rmse": [rmse(model.predict_matrix(x), y)],
    }
    return model
