"""Seeded tune / repeated cross-validation protocol and cross-learner comparison."""
from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import learners
from .datamodel import DataTable
from .errors import InputError, RegbenchError
from .learners import LearnerConfig
from .rng import SplitMix64
from .stats import KruskalResult, kruskal_wallis, rmse

GRID_SIZE = 20
DEFAULT_K = 10
BOOSTING_TREES = (200, 500, 1000, 2000)


def resolve_threads(requested: int | None = None) -> int:
    """Explicit request, else ``REGBENCH_THREADS``, else the CPU count."""
    if requested is not None:
        threads = int(requested)
    elif os.environ.get("REGBENCH_THREADS"):
        threads = int(os.environ["REGBENCH_THREADS"])
    else:
        threads = os.cpu_count() or 1
    if threads < 1:
        raise InputError("thread count must be at least 1")
    return threads


def _ordered_map(fn, items, threads: int) -> list:
    """``map`` whose result order never depends on the thread count."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class FoldPlan:
    seed: int
    k: int
    assignment: tuple[int, ...]  # row index -> fold id

    @property
    def n_rows(self) -> int:
        return len(self.assignment)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignment) == fold)

    def fold_sizes(self) -> list[int]:
        return np.bincount(np.asarray(self.assignment), minlength=self.k).tolist()


def make_folds(n_rows: int, k: int, seed: int) -> FoldPlan:
    """SplitMix64-seeded Fisher-Yates shuffle of row indices, dealt round-robin into ``k`` folds."""
    if k < 2:
        raise InputError("k must be at least 2")
    if k > n_rows:
        raise InputError(f"cannot make {k} folds from {n_rows} rows")
    order = SplitMix64(seed).shuffle(list(range(n_rows)))
    assignment = [0] * n_rows
    for position, row in enumerate(order):
        assignment[row] = position % k
    return FoldPlan(int(seed), int(k), tuple(assignment))


def _fold_rmse(table: DataTable, response: str, config: LearnerConfig, plan: FoldPlan, fold: int,
               features: Sequence[str] | None) -> float:
    test_idx = plan.test_indices(fold)
    test, train = table.split_rows(test_idx)
    try:
        model = learners.fit(config, train, response, features)
        return rmse(model.predict(test), test.column(response))
    except RegbenchError as exc:
        raise type(exc)(f"{config.name}, fold {fold} (seed {plan.seed}): {exc}") from exc


def cross_validate(table: DataTable, response: str, config: LearnerConfig, plan: FoldPlan,
                   features: Sequence[str] | None = None, threads: int = 1) -> np.ndarray:
    """Held-out RMSE for every fold, ordered by fold id."""
    if plan.n_rows != table.n_rows:
        raise InputError(f"fold plan covers {plan.n_rows} rows, table has {table.n_rows}")
    return np.array(_ordered_map(lambda f: _fold_rmse(table, response, config, plan, f, features),
                                 range(plan.k), threads))


def _boosting_levels(max_trees: int | None) -> list[int]:
    if max_trees is None:
        return list(BOOSTING_TREES)
    if max_trees < 1:
        raise InputError("max_trees must be positive")
    scale = max_trees / BOOSTING_TREES[-1]
    return sorted({max(1, round(t * scale)) for t in BOOSTING_TREES})


def default_grid(learner: str, max_trees: int | None = None, seed: int = 0) -> list[LearnerConfig]:
    """The fixed 20-candidate grid for ``learner``.

    gbm/xgb: trees x depth x learning rate, trees-major, first 20 of 24
    (``max_trees`` rescales the tree levels so the largest equals it).
    cart: depth x min_obs x min_improve. earth: max_terms x degree x penalty.
    linear/glm have no hyperparameters, so their grid repeats one config.
    """
    if learner in ("linear", "glm"):
        return [LearnerConfig(learner, {}, seed)] * GRID_SIZE
    if learner == "gbm":
        combos = itertools.product(_boosting_levels(max_trees), (2, 4, 6), (0.05, 0.1))
        grid = [LearnerConfig("gbm", {"num_trees": t, "interaction_depth": d, "shrinkage": s}, seed)
                for t, d, s in combos]
    elif learner == "xgb":
        combos = itertools.product(_boosting_levels(max_trees), (2, 4, 6), (0.05, 0.1))
        grid = [LearnerConfig("xgb", {"num_trees": t, "max_depth": d, "eta": s}, seed) for t, d, s in combos]
    elif learner == "cart":
        combos = itertools.product((2, 4, 6, 8, 12), (5, 20), (0.0, 1e-4))
        grid = [LearnerConfig("cart", {"max_depth": d, "min_obs": m, "min_improve": c}, seed) for d, m, c in combos]
    elif learner == "earth":
        combos = itertools.product((11, 21, 31, 41, 51), (1, 2), (2.0, 3.0))
        grid = [LearnerConfig("earth", {"max_terms": t, "max_degree": d, "penalty": p}, seed) for t, d, p in combos]
    else:
        raise InputError(f"unknown learner {learner!r}")
    grid = grid[:GRID_SIZE]
    while len(grid) < GRID_SIZE:
        grid.append(grid[-1])
    return grid


@dataclass
class TuneResult:
    best: LearnerConfig
    best_index: int
    mean_rmse: list[float]
    seed: int
    k: int

    def to_dict(self) -> dict:
        return {
            "best": self.best.to_dict(),
            "best_index": self.best_index,
            "candidates_mean_rmse": self.mean_rmse,
            "shared_tuning_seed": self.seed,
            "k": self.k,
        }


def _prefix_group(cfg: LearnerConfig) -> str:
    """Boosting configs that differ only in tree count share one fit; others stand alone."""
    if cfg.learner not in ("gbm", "xgb"):
        return cfg.key()
    params = learners.resolve_params(cfg.learner, cfg.params)
    params.pop("num_trees")
    return LearnerConfig(cfg.learner, params, cfg.seed).key()


def _group_fold_rmse(table: DataTable, response: str, members: dict[str, LearnerConfig], plan: FoldPlan,
                     fold: int, features: Sequence[str] | None) -> dict[str, float]:
    if len(members) == 1:
        (key, cfg), = members.items()
        return {key: _fold_rmse(table, response, cfg, plan, fold, features)}
    # a boosted model with t trees is the first t trees of any longer fit with the same seed
    counts = {key: learners.resolve_params(c.learner, c.params)["num_trees"] for key, c in members.items()}
    largest = members[max(counts, key=counts.get)]
    test, train = table.split_rows(plan.test_indices(fold))
    try:
        model = learners.fit(largest, train, response, features)
    except RegbenchError as exc:
        raise type(exc)(f"{largest.name}, fold {fold} (seed {plan.seed}): {exc}") from exc
    y = test.column(response)
    stages = model.staged_predict(test.matrix(model.feature_names), counts.values())
    return {key: rmse(stages[c], y) for key, c in counts.items()}


def tune(table: DataTable, response: str, learner: str, grid: Sequence[LearnerConfig] | None = None,
         shared_seed: int = 0, k: int = DEFAULT_K, features: Sequence[str] | None = None,
         threads: int = 1) -> TuneResult:
    """Lowest mean CV RMSE over ``grid`` on one shared fold plan; ties go to the earliest candidate."""
    grid = default_grid(learner) if grid is None else list(grid)
    if not grid:
        raise InputError("empty tuning grid")
    for cfg in grid:
        if cfg.learner != learner:
            raise InputError(f"grid entry for {cfg.learner!r} in a {learner!r} tuning run")
    plan = make_folds(table.n_rows, k, shared_seed)
    groups: dict[str, dict[str, LearnerConfig]] = {}
    for cfg in grid:
        groups.setdefault(_prefix_group(cfg), {}).setdefault(cfg.key(), cfg)
    jobs = [(members, fold) for members in groups.values() for fold in range(k)]
    results = _ordered_map(lambda job: _group_fold_rmse(table, response, job[0], plan, job[1], features),
                           jobs, threads)
    fold_scores: dict[str, list[float]] = {}
    for scores in results:
        for key, value in scores.items():
            fold_scores.setdefault(key, []).append(value)
    means = [float(np.mean(fold_scores[cfg.key()])) for cfg in grid]
    best_index = int(np.argmin(means))  # first minimum
    return TuneResult(grid[best_index], best_index, means, int(shared_seed), k)


@dataclass
class CvOutcome:
    config: LearnerConfig
    samples: list[float]  # repetition-major, fold-minor
    seeds: list[int]

    @property
    def tag(self) -> str:
        return self.config.name

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    @property
    def sd(self) -> float:
        return float(np.std(self.samples, ddof=1)) if len(self.samples) > 1 else 0.0

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "learner": self.config.learner,
            "params": dict(self.config.params),
            "seed": self.config.seed,
            "rmse_samples": list(self.samples),
            "mean": self.mean,
            "sd": self.sd,
        }


@dataclass
class ComparisonReport:
    response: str
    k: int
    repeat_seeds: list[int]
    outcomes: list[CvOutcome]
    kruskal: KruskalResult
    dataset_fingerprint: str
    shared_tuning_seed: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def ranking(self) -> list[str]:
        order = sorted(range(len(self.outcomes)), key=lambda i: (self.outcomes[i].mean, i))
        return [self.outcomes[i].tag for i in order]

    def outcome(self, tag: str) -> CvOutcome:
        for o in self.outcomes:
            if o.tag == tag:
                return o
        raise KeyError(tag)

    def to_dict(self) -> dict:
        d = {
            "dataset_fingerprint": self.dataset_fingerprint,
            "response": self.response,
            "k": self.k,
            "repeat_seeds": list(self.repeat_seeds),
            "shared_tuning_seed": self.shared_tuning_seed,
            "learners": [o.to_dict() for o in self.outcomes],
            "kruskal": self.kruskal.to_dict(),
            "ranking": self.ranking,
        }
        d.update(self.extra)
        return d


def evaluate(table: DataTable, response: str, configs: Sequence[LearnerConfig], k: int = DEFAULT_K,
             repeat_seeds: Sequence[int] = (1, 2), features: Sequence[str] | None = None,
             threads: int = 1, shared_tuning_seed: int | None = None) -> ComparisonReport:
    """Repeated k-fold CV of every config on the same fold plans, then Kruskal-Wallis over the RMSE groups."""
    if len(configs) < 2:
        raise InputError("evaluate needs at least 2 learner configs")
    tags = [c.name for c in configs]
    if len(set(tags)) != len(tags):
        raise InputError(f"learner labels must be unique, got {tags}")
    if len(set(repeat_seeds)) != len(repeat_seeds):
        raise InputError("repeat seeds must be distinct")
    plans = [make_folds(table.n_rows, k, s) for s in repeat_seeds]
    jobs = [(ci, pi, fold) for ci in range(len(configs)) for pi in range(len(plans)) for fold in range(k)]
    scores = _ordered_map(
        lambda job: _fold_rmse(table, response, configs[job[0]], plans[job[1]], job[2], features), jobs, threads)
    per = len(plans) * k
    outcomes = [CvOutcome(cfg, [float(s) for s in scores[i * per:(i + 1) * per]], [int(s) for s in repeat_seeds])
                for i, cfg in enumerate(configs)]
    kw = kruskal_wallis([o.samples for o in outcomes], tags)
    return ComparisonReport(response, k, [int(s) for s in repeat_seeds], outcomes, kw, table.fingerprint(),
                            shared_tuning_seed)

