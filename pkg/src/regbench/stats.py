"""Statistical kernel: skewness, Kendall tau-b, RMSE, OLS, Kruskal-Wallis with Dunn post hoc."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import fdtrc

from ._special import chi2_sf, two_sided_normal_p
from .errors import CollinearityError, DegenerateColumnError, InputError

ALPHA = 0.05
COLLINEARITY_TOL = 1e-10


def _as_vector(values, name="values") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or infinity")
    return arr


def skewness(values, adjusted: bool = False) -> float:
    """Moment coefficient of skewness g1 = m3 / m2**1.5.

    With ``adjusted=True`` the Fisher-Pearson G1 = g1 * sqrt(n(n-1)) / (n-2) is returned.
    """
    x = _as_vector(values)
    n = x.size
    if n < 3:
        raise InputError("skewness needs at least 3 values")
    d = x - x.mean()
    m2 = np.mean(d * d)
    if m2 == 0.0 or np.all(x == x[0]):
        raise DegenerateColumnError("skewness undefined for a constant column")
    m3 = np.mean(d * d * d)
    g1 = float(m3 / m2**1.5)
    if adjusted:
        return g1 * math.sqrt(n * (n - 1)) / (n - 2)
    return g1


# ---------------------------------------------------------------- Kendall


@dataclass(frozen=True)
class CorrelationCell:
    tau: float
    p_value: float
    effect: str
    significant: bool

    def to_dict(self) -> dict:
        return {"tau": self.tau, "p": self.p_value, "effect": self.effect, "significant": self.significant}


def effect_label(tau: float) -> str:
    """Cohen-style magnitude label applied to |tau|."""
    a = abs(tau)
    if a >= 0.5:
        return "high"
    if a >= 0.3:
        return "medium"
    return "negligible"


def _tie_sums(values: np.ndarray) -> tuple[int, int, int]:
    """Sums of t(t-1)/2, t(t-1)(2t+5) and t(t-1)(t-2) over tie groups."""
    _, counts = np.unique(values, return_counts=True)
    t = counts.astype(np.int64)
    return int((t * (t - 1) // 2).sum()), int((t * (t - 1) * (2 * t + 5)).sum()), int((t * (t - 1) * (t - 2)).sum())


def _count_inversions(ranks: np.ndarray) -> int:
    """Pairs i < j with ranks[i] > ranks[j], via a Fenwick tree over dense ranks."""
    size = int(ranks.max()) + 1 if ranks.size else 0
    tree = [0] * (size + 1)
    inversions = 0
    seen = 0
    for r in ranks.tolist():
        # elements already inserted with rank > r
        i = r + 1
        le = 0
        while i > 0:
            le += tree[i]
            i -= i & -i
        inversions += seen - le
        i = r + 1
        while i <= size:
            tree[i] += 1
            i += i & -i
        seen += 1
    return inversions


def kendall_tau_b(x, y) -> CorrelationCell:
    """Kendall tau-b with a tie-corrected normal-approximation p value (Knight's O(n log n) counting)."""
    x = _as_vector(x, "x")
    y = _as_vector(y, "y")
    if x.size != y.size:
        raise InputError(f"length mismatch: {x.size} vs {y.size}")
    n = x.size
    if n < 2:
        raise InputError("kendall_tau_b needs at least 2 observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateColumnError("kendall_tau_b undefined for a constant vector")

    order = np.lexsort((y, x))
    xs, ys = x[order], y[order]
    n0 = n * (n - 1) // 2
    n1, vt, t3 = _tie_sums(xs)
    n2, vu, u3 = _tie_sums(ys)
    # joint ties: consecutive equal (x, y) pairs after lexsort
    change = np.ones(n, dtype=bool)
    change[1:] = (xs[1:] != xs[:-1]) | (ys[1:] != ys[:-1])
    starts = np.flatnonzero(change)
    runs = np.diff(np.append(starts, n)).astype(np.int64)
    n3 = int((runs * (runs - 1) // 2).sum())
    dense = np.unique(ys, return_inverse=True)[1].reshape(-1)
    discordant = _count_inversions(dense)
    s = n0 - n1 - n2 + n3 - 2 * discordant

    tau = s / math.sqrt(float(n0 - n1) * float(n0 - n2))
    tau = max(-1.0, min(1.0, tau))

    var = (n * (n - 1) * (2 * n + 5) - vt - vu) / 18.0
    var += (2.0 * n1) * (2.0 * n2) / (2.0 * n * (n - 1))
    if n > 2:
        var += float(t3) * float(u3) / (9.0 * n * (n - 1) * (n - 2))
    p = two_sided_normal_p(s / math.sqrt(var)) if var > 0 else 1.0
    return CorrelationCell(tau=tau, p_value=p, effect=effect_label(tau), significant=p < ALPHA)


def correlation_matrix(table, names: Sequence[str] | None = None) -> dict:
    """Upper-triangular Kendall matrix as a JSON-ready dict."""
    names = list(table.column_names if names is None else names)
    cells = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            cells[f"{a}|{b}"] = kendall_tau_b(table.column(a), table.column(b)).to_dict()
    return {"columns": names, "cells": cells}


# ---------------------------------------------------------------- RMSE


def rmse(predicted, actual) -> float:
    p = _as_vector(predicted, "predicted")
    a = _as_vector(actual, "actual")
    if p.size != a.size:
        raise InputError(f"length mismatch: {p.size} vs {a.size}")
    if p.size == 0:
        raise InputError("rmse of empty vectors")
    d = p - a
    return float(math.sqrt(np.mean(d * d)))


# ---------------------------------------------------------------- OLS


def qr_solve(design: np.ndarray, y: np.ndarray, names: Sequence[str]) -> np.ndarray:
    """Least-squares coefficients via Householder QR with a rank check on diag(R)."""
    q, r = np.linalg.qr(design, mode="reduced")
    diag = np.abs(np.diag(r))
    biggest = diag.max() if diag.size else 0.0
    for j, d in enumerate(diag):
        if d < COLLINEARITY_TOL * biggest or biggest == 0.0:
            raise CollinearityError(f"design matrix is rank deficient at column {names[j]!r}")
    return solve_triangular(r, q.T @ y, lower=False)


@dataclass
class OlsReport:
    names: list[str]
    coefficients: np.ndarray  # intercept first
    r_squared: float
    f_statistic: float
    df_model: int
    df_residual: int
    p_value: float
    residual_variance: float

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[1 + self.names.index(name)])

    def predict(self, matrix) -> np.ndarray:
        x = np.asarray(matrix, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        return self.coefficients[0] + x @ self.coefficients[1:]

    def to_dict(self) -> dict:
        def finite(v):
            return float(v) if math.isfinite(v) else None

        return {
            "predictors": list(self.names),
            "intercept": float(self.coefficients[0]),
            "coefficients": {n: float(c) for n, c in zip(self.names, self.coefficients[1:])},
            "r_squared": finite(self.r_squared),
            "f_statistic": finite(self.f_statistic),
            "df_model": self.df_model,
            "df_residual": self.df_residual,
            "p_value": finite(self.p_value),
            "residual_variance": finite(self.residual_variance),
        }


def ols_fit(predictors, response, names: Sequence[str] | None = None) -> OlsReport:
    """Multiple regression with intercept.

    ``predictors`` is a DataTable or a 2-D array (then ``names`` labels its columns).
    """
    if hasattr(predictors, "column_names"):
        names = list(predictors.column_names)
        x = predictors.matrix()
    else:
        x = np.asarray(predictors, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        names = list(names) if names is not None else [f"x{j + 1}" for j in range(x.shape[1])]
    y = _as_vector(response, "response")
    n, p = x.shape
    if y.size != n:
        raise InputError(f"response has {y.size} rows, predictors {n}")
    if n <= p + 1:
        raise InputError(f"need more than {p + 1} rows to fit {p} predictors, got {n}")
    design = np.column_stack([np.ones(n), x])
    beta = qr_solve(design, y, ["intercept"] + names)
    resid = y - design @ beta
    sse = float(resid @ resid)
    centered = y - y.mean()
    sst = float(centered @ centered)
    df_res = n - p - 1
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    r2 = min(1.0, max(0.0, r2))
    sigma2 = sse / df_res
    if sse > 0 and p > 0:
        f = ((sst - sse) / p) / sigma2
        pval = float(fdtrc(p, df_res, f))
    else:
        f, pval = math.inf, 0.0
    return OlsReport(names, beta, r2, f, p, df_res, pval, sigma2)


# ---------------------------------------------------------------- Kruskal-Wallis


def midranks(values) -> np.ndarray:
    """1-based ranks with ties assigned their average rank."""
    x = _as_vector(values)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(x.size)
    change = np.ones(x.size, dtype=bool)
    change[1:] = xs[1:] != xs[:-1]
    starts = np.flatnonzero(change)
    ends = np.append(starts[1:], x.size)
    avg = (starts + ends + 1) / 2.0
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


@dataclass(frozen=True)
class PairwiseResult:
    a: str
    b: str
    z: float
    p_raw: float
    p_adj: float

    @property
    def label(self) -> str:
        return f"{self.a}-{self.b}"


@dataclass
class KruskalResult:
    h_statistic: float
    df: int
    p_value: float
    p_method: str = "asymptotic"
    pairwise: list[PairwiseResult] = field(default_factory=list)
    mean_ranks: dict[str, float] = field(default_factory=dict)

    def pair(self, a: str, b: str) -> PairwiseResult:
        for pr in self.pairwise:
            if (pr.a, pr.b) == (a, b):
                return pr
            if (pr.a, pr.b) == (b, a):
                return PairwiseResult(a, b, -pr.z, pr.p_raw, pr.p_adj)
        raise KeyError(f"{a}-{b}")

    def to_dict(self) -> dict:
        return {
            "h": self.h_statistic,
            "df": self.df,
            "p": self.p_value,
            "p_method": self.p_method,
            "pairwise": [{"a": p.a, "b": p.b, "z": p.z, "p_adj": p.p_adj} for p in self.pairwise],
        }


def bonferroni(p_values: Sequence[float], n_comparisons: int | None = None) -> list[float]:
    m = len(p_values) if n_comparisons is None else n_comparisons
    return [min(1.0, p * m) for p in p_values]


# permutation p is computed exactly when enumeration stays this small
EXACT_MAX_ASSIGNMENTS = 50_000_000
EXACT_MAX_OUTER = 60_000


@lru_cache(maxsize=64)
def _combos(m: int, r: int) -> np.ndarray:
    return np.array(list(combinations(range(m), r)), dtype=np.int64).reshape(-1, r)


def _assignment_counts(sizes: Sequence[int]) -> tuple[int, int]:
    """(number of distinct group assignments, python-level loop iterations to enumerate them)."""
    remaining = int(sum(sizes))
    total, outer = 1, 1
    for i, n in enumerate(sizes[:-1]):
        c = math.comb(remaining, n)
        total *= c
        if i < len(sizes) - 2:
            outer *= c
        remaining -= n
    return total, outer


def _exact_kw_pvalue(ranks: np.ndarray, sizes: Sequence[int], observed: float) -> float:
    """P(sum R_i^2/n_i >= observed) over all equally likely assignments of the pooled ranks."""
    tol = 1e-9 * max(1.0, abs(observed))

    def count(pool: np.ndarray, group_sizes: Sequence[int], partial: float) -> int:
        na = group_sizes[0]
        combos = _combos(pool.size, na)
        if len(group_sizes) == 2:
            nb = group_sizes[1]
            ra = pool[combos].sum(axis=1)
            rb = pool.sum() - ra
            stat = partial + ra * ra / na + rb * rb / nb
            return int(np.count_nonzero(stat >= observed - tol))
        hits = 0
        mask = np.ones(pool.size, dtype=bool)
        for c in combos:
            ra = pool[c].sum()
            mask[:] = True
            mask[c] = False
            hits += count(pool[mask], group_sizes[1:], partial + ra * ra / na)
        return hits

    total, _ = _assignment_counts(sizes)
    return count(np.asarray(ranks, dtype=np.float64), list(sizes), 0.0) / total


def kruskal_wallis(groups: Sequence, labels: Sequence[str] | None = None, method: str = "auto") -> KruskalResult:
    """Tie-corrected Kruskal-Wallis H with Dunn pairwise z and Bonferroni-adjusted p.

    ``method``: ``asymptotic`` takes p from the chi-square survival function
    with k-1 degrees of freedom; ``exact`` enumerates every assignment of the
    pooled mid-ranks to groups; ``auto`` is exact when enumeration is cheap
    (small samples, where the chi-square tail is unreliable) and asymptotic
    otherwise.
    """
    if method not in ("auto", "asymptotic", "exact"):
        raise InputError(f"unknown method {method!r}")
    groups = [_as_vector(g, "group") for g in groups]
    k = len(groups)
    if k < 2:
        raise InputError("kruskal_wallis needs at least 2 groups")
    if any(g.size == 0 for g in groups):
        raise InputError("every group needs at least one value")
    labels = [str(i + 1) for i in range(k)] if labels is None else [str(l) for l in labels]
    if len(labels) != k:
        raise InputError("labels and groups differ in length")

    pooled = np.concatenate(groups)
    n_total = pooled.size
    ranks = midranks(pooled)
    sizes = np.array([g.size for g in groups])
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    rank_sums = np.array([ranks[bounds[i]:bounds[i + 1]].sum() for i in range(k)])
    mean_ranks = rank_sums / sizes

    _, ties = np.unique(pooled, return_counts=True)
    tie_term = float(((ties.astype(np.float64) ** 3) - ties).sum())
    correction = 1.0 - tie_term / (n_total**3 - n_total) if n_total > 1 else 0.0
    n_assign, n_outer = _assignment_counts(sizes.tolist())
    exact = method == "exact" or (
        method == "auto" and n_assign <= EXACT_MAX_ASSIGNMENTS and n_outer <= EXACT_MAX_OUTER)
    if correction <= 0.0:
        h, p = 0.0, 1.0
    else:
        spread = float((rank_sums**2 / sizes).sum())
        raw = 12.0 / (n_total * (n_total + 1)) * spread - 3.0 * (n_total + 1)
        h = max(0.0, raw / correction)
        p = _exact_kw_pvalue(ranks, sizes.tolist(), spread) if exact else chi2_sf(h, k - 1)

    n_pairs = k * (k - 1) // 2
    base = n_total * (n_total + 1) / 12.0 - (tie_term / (12.0 * (n_total - 1)) if n_total > 1 else 0.0)
    pairwise = []
    for i, j in combinations(range(k), 2):
        var = base * (1.0 / sizes[i] + 1.0 / sizes[j])
        diff = float(mean_ranks[i] - mean_ranks[j])
        if var <= 0.0 or diff == 0.0:
            z, praw = 0.0, 1.0
        else:
            z = diff / math.sqrt(var)
            praw = two_sided_normal_p(z)
        pairwise.append(PairwiseResult(labels[i], labels[j], z, praw, min(1.0, praw * n_pairs)))
    return KruskalResult(h, k - 1, p, "exact" if exact else "asymptotic", pairwise, dict(zip(labels, map(float, mean_ranks))))
