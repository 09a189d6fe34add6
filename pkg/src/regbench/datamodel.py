"""Numeric table substrate shared by every modeling step."""
from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, ParseError

log = logging.getLogger(__name__)

MISSING_POLICIES = ("error", "drop_row")


@dataclass(frozen=True)
class LoadReport:
    rows_read: int
    rows_dropped: int


@dataclass(frozen=True)
class ColumnRole:
    name: str
    role: str  # predictor | response | identifier

    def __post_init__(self):
        if self.role not in ("predictor", "response", "identifier"):
            raise ValueError(f"unknown column role {self.role!r}")


def format_number(value: float) -> str:
    """Shortest round-trip decimal; integral values are written without a fraction."""
    if value.is_integer() and abs(value) < 2**53:
        return str(int(value))
    return repr(float(value))


class DataTable:
    """Named float64 columns of equal length.

    Columns are stored read-only; every operation returns a new table.
    ``meta`` carries provenance (e.g. which transform recipe was applied).
    """

    def __init__(self, column_names: Sequence[str], columns: Sequence[Iterable[float]], meta: dict | None = None):
        names = [str(n) for n in column_names]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise InputError(f"duplicate column name {dup!r}")
        if len(names) != len(columns):
            raise InputError("column_names and columns differ in length")
        arrays = []
        for name, col in zip(names, columns):
            arr = np.array(col, dtype=np.float64)
            if arr.ndim != 1:
                raise InputError(f"column {name!r} is not one-dimensional")
            if not np.all(np.isfinite(arr)):
                raise InputError(f"column {name!r} contains NaN or infinity")
            arr.setflags(write=False)
            arrays.append(arr)
        lengths = {a.shape[0] for a in arrays}
        if len(lengths) > 1:
            raise InputError(f"columns have unequal lengths {sorted(lengths)}")
        self.column_names: list[str] = names
        self.columns: list[np.ndarray] = arrays
        self.n_rows: int = lengths.pop() if lengths else 0
        self.meta: dict = dict(meta or {})
        self.load_report: LoadReport | None = None

    @classmethod
    def from_dict(cls, data: dict[str, Iterable[float]], meta: dict | None = None) -> "DataTable":
        return cls(list(data), list(data.values()), meta)

    @classmethod
    def from_matrix(cls, names: Sequence[str], matrix: np.ndarray) -> "DataTable":
        matrix = np.asarray(matrix, dtype=np.float64)
        return cls(names, [matrix[:, j] for j in range(matrix.shape[1])])

    def __len__(self) -> int:
        return self.n_rows

    def __contains__(self, name: str) -> bool:
        return name in self.column_names

    def __eq__(self, other) -> bool:
        if not isinstance(other, DataTable):
            return NotImplemented
        return self.column_names == other.column_names and all(
            np.array_equal(a, b) for a, b in zip(self.columns, other.columns)
        )

    def __repr__(self) -> str:
        return f"DataTable({self.n_rows} rows x {len(self.column_names)} columns)"

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[self.column_names.index(name)]
        except ValueError:
            raise InputError(f"unknown column {name!r}") from None

    def matrix(self, names: Sequence[str] | None = None) -> np.ndarray:
        names = self.column_names if names is None else names
        if not names:
            return np.empty((self.n_rows, 0))
        return np.column_stack([self.column(n) for n in names])

    def select(self, names: Sequence[str]) -> "DataTable":
        return DataTable(list(names), [self.column(n) for n in names], self.meta)

    def drop(self, names: Sequence[str]) -> "DataTable":
        for n in names:
            self.column(n)
        return self.select([n for n in self.column_names if n not in set(names)])

    def take(self, indices: Sequence[int]) -> "DataTable":
        idx = self._check_indices(indices)
        return DataTable(self.column_names, [c[idx] for c in self.columns], self.meta)

    def split_rows(self, indices: Sequence[int]) -> tuple["DataTable", "DataTable"]:
        """Return (rows at ``indices`` in the given order, remaining rows in table order)."""
        idx = self._check_indices(indices)
        mask = np.ones(self.n_rows, dtype=bool)
        mask[idx] = False
        rest = np.flatnonzero(mask)
        return self.take(idx), self.take(rest)

    def with_column(self, name: str, values: Iterable[float]) -> "DataTable":
        if name in self.column_names:
            cols = [values if n == name else c for n, c in zip(self.column_names, self.columns)]
            return DataTable(self.column_names, cols, self.meta)
        return DataTable(self.column_names + [name], self.columns + [values], self.meta)

    def _check_indices(self, indices: Sequence[int]) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64).reshape(-1)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_rows):
            bad = idx[(idx < 0) | (idx >= self.n_rows)][0]
            raise InputError(f"row index {bad} out of range for {self.n_rows} rows")
        if np.unique(idx).size != idx.size:
            raise InputError("row indices contain duplicates")
        return idx

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.column_names)
        for i in range(self.n_rows):
            writer.writerow([format_number(float(c[i])) for c in self.columns])
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv_text(), encoding="utf-8")

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_csv_text().encode("utf-8")).hexdigest()


def concat_rows(tables: Sequence[DataTable]) -> DataTable:
    names = tables[0].column_names
    for t in tables[1:]:
        if t.column_names != names:
            raise InputError("cannot concatenate tables with different columns")
    return DataTable(names, [np.concatenate([t.column(n) for t in tables]) for n in names])


def _parse_cell(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(text)
    return value


def read_csv_text(text: str, missing_policy: str = "error", exclude: Sequence[str] = (), source: str = "<text>") -> DataTable:
    if missing_policy not in MISSING_POLICIES:
        raise InputError(f"missing_policy must be one of {MISSING_POLICIES}")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{source}: missing header row") from None
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        dup = next(h for h in header if header.count(h) > 1)
        raise ParseError(f"{source}: duplicate header {dup!r}")
    missing_excluded = [e for e in exclude if e not in header]
    if missing_excluded:
        raise InputError(f"{source}: cannot exclude unknown columns {missing_excluded}")
    keep = [j for j, h in enumerate(header) if h not in set(exclude)]
    rows: list[list[float]] = []
    read = dropped = 0
    for line_no, record in enumerate(reader, start=2):
        if not record:
            continue
        read += 1
        if len(record) != len(header):
            raise ParseError(f"{source}: row {line_no} has {len(record)} cells, expected {len(header)}")
        values = []
        bad = None
        for j in keep:
            cell = record[j].strip()
            try:
                values.append(_parse_cell(cell))
            except ValueError:
                bad = (j, cell)
                break
        if bad is not None:
            if missing_policy == "drop_row":
                dropped += 1
                continue
            j, cell = bad
            what = "empty cell" if cell == "" else f"non-numeric cell {cell!r}"
            raise ParseError(f"{source}: {what} at row {line_no}, column {header[j]!r}")
        rows.append(values)
    names = [header[j] for j in keep]
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    table = DataTable(names, [matrix[:, j] for j in range(len(names))])
    table.load_report = LoadReport(rows_read=read, rows_dropped=dropped)
    log.info("%s: read %d rows, dropped %d", source, read, dropped)
    return table


def load_csv(path: str | Path, missing_policy: str = "error", exclude: Sequence[str] = ()) -> DataTable:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    text = path.read_text(encoding="utf-8-sig")
    return read_csv_text(text, missing_policy, exclude, source=str(path))
