"""Automatically transformed linear model baseline.

Each column is tested for skew; skewed columns get ``log1p`` if that brings
|skewness| within the threshold, otherwise ``sqrt``. The transformed code
attributes are then regressed on the transformed response.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .datamodel import DataTable
from .errors import InputError
from .ingest import CODE_ATTRIBUTES, VIOLATION_CATEGORIES
from .stats import OlsReport, ols_fit, skewness

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 1.0
TRANSFORMS = ("none", "log", "sqrt")
PROVENANCE_KEY = "transform_recipe"


@dataclass(frozen=True)
class ColumnTransform:
    name: str
    transform: str
    skew_before: float
    skew_after: float | None  # skewness after log1p; None when log1p was not tried
    threshold: float


@dataclass(frozen=True)
class TransformRecipe:
    columns: tuple[ColumnTransform, ...]

    def tag(self, name: str) -> str:
        for c in self.columns:
            if c.name == name:
                return c.transform
        raise InputError(f"recipe has no column {name!r}")

    def tags(self) -> dict[str, str]:
        return {c.name: c.transform for c in self.columns}

    def to_list(self) -> list[dict]:
        return [asdict(c) for c in self.columns]

    def to_json(self) -> str:
        return json.dumps(self.to_list(), sort_keys=True, indent=2)

    @classmethod
    def from_list(cls, items: list[dict]) -> "TransformRecipe":
        cols = []
        for d in items:
            if d["transform"] not in TRANSFORMS:
                raise InputError(f"unknown transform {d['transform']!r}")
            cols.append(ColumnTransform(d["name"], d["transform"], float(d["skew_before"]),
                                        None if d.get("skew_after") is None else float(d["skew_after"]),
                                        float(d["threshold"])))
        return cls(tuple(cols))

    @classmethod
    def from_json(cls, text: str) -> "TransformRecipe":
        return cls.from_list(json.loads(text))

    def apply(self, table: DataTable) -> DataTable:
        """Transform raw columns; columns not named in the recipe pass through."""
        if PROVENANCE_KEY in table.meta:
            raise InputError("table has already been transformed by a recipe")
        names = {c.name: c for c in self.columns}
        cols = []
        for name in table.column_names:
            col = table.column(name)
            cols.append(apply_transform(col, names[name].transform, name) if name in names else col)
        meta = dict(table.meta)
        meta[PROVENANCE_KEY] = self.to_list()
        return DataTable(table.column_names, cols, meta)


def apply_transform(column, tag: str, name: str = "column") -> np.ndarray:
    x = np.asarray(column, dtype=np.float64)
    if tag == "none":
        return x.copy()
    if tag == "log":
        bad = np.flatnonzero(x < -1)
        if bad.size:
            raise InputError(f"log1p undefined for {name} row {bad[0]} (value {x[bad[0]]})")
        return np.log1p(x)
    if tag == "sqrt":
        bad = np.flatnonzero(x < 0)
        if bad.size:
            raise InputError(f"sqrt of negative value in {name} row {bad[0]} (value {x[bad[0]]})")
        return np.sqrt(x)
    raise InputError(f"unknown transform {tag!r}")


def _normal(skew: float, threshold: float) -> bool:
    return abs(skew) <= threshold


def choose_column_transform(column, threshold: float = DEFAULT_THRESHOLD, name: str = "column") -> ColumnTransform:
    x = np.asarray(column, dtype=np.float64)
    if x.size < 3:
        raise InputError(f"{name}: need at least 3 values to judge skewness")
    before = skewness(x)
    if _normal(before, threshold):
        return ColumnTransform(name, "none", before, None, threshold)
    if x.min() < -1:
        # neither log1p nor sqrt is defined
        log.warning("%s is skewed (%.3f) but has values below -1; left untransformed", name, before)
        return ColumnTransform(name, "none", before, None, threshold)
    after_log = np.log1p(x)
    after = skewness(after_log) if np.ptp(after_log) > 0 else 0.0
    if _normal(after, threshold) or x.min() < 0:
        return ColumnTransform(name, "log", before, after, threshold)
    return ColumnTransform(name, "sqrt", before, after, threshold)


def choose_transform(column, threshold: float = DEFAULT_THRESHOLD) -> str:
    return choose_column_transform(column, threshold).transform


def fit_recipe(table: DataTable, threshold: float = DEFAULT_THRESHOLD, columns: Sequence[str] | None = None) -> TransformRecipe:
    names = table.column_names if columns is None else list(columns)
    return TransformRecipe(tuple(choose_column_transform(table.column(n), threshold, n) for n in names))


def transform_table(table: DataTable, threshold: float = DEFAULT_THRESHOLD) -> tuple[DataTable, TransformRecipe]:
    recipe = fit_recipe(table, threshold)
    return recipe.apply(table), recipe


@dataclass
class BaselineReport:
    recipe: TransformRecipe
    ols: OlsReport
    response_name: str

    def to_dict(self) -> dict:
        return {"response": self.response_name, "recipe": self.recipe.to_list(), "ols": self.ols.to_dict()}


def default_predictors(table: DataTable, response: str) -> list[str]:
    """The ten code attributes when present; otherwise every non-response column."""
    if all(c in table.column_names for c in CODE_ATTRIBUTES):
        return list(CODE_ATTRIBUTES)
    return [n for n in table.column_names if n != response and n not in VIOLATION_CATEGORIES]


def build_baseline(table: DataTable, response: str, threshold: float = DEFAULT_THRESHOLD,
                   predictors: Sequence[str] | None = None) -> BaselineReport:
    """Transform raw columns by skewness, then fit OLS of the predictors on the response."""
    if response not in table.column_names:
        raise InputError(f"response column {response!r} not in table")
    predictors = default_predictors(table, response) if predictors is None else list(predictors)
    if len(predictors) < 2:
        raise InputError("baseline needs at least 2 predictors")
    recipe = fit_recipe(table, threshold, predictors + [response])
    transformed = recipe.apply(table.select(predictors + [response]))
    report = ols_fit(transformed.select(predictors), transformed.column(response))
    return BaselineReport(recipe, report, response)
