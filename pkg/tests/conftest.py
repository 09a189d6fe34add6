import numpy as np
import pytest

from regbench.datamodel import DataTable
from regbench.ingest import TABLE_COLUMNS

ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, passed: bool, detail: str = "") -> str:
    line = f"[acceptance] {criterion}: {'PASS' if passed else 'FAIL'}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def code_table(n=300, seed=5) -> DataTable:
    """Synthetic modeling table shaped like snippet/violation data."""
    rng = np.random.default_rng(seed)
    loc = rng.integers(4, 60, n)
    code_length = loc * rng.integers(20, 40, n)
    code_spaces = code_length // 5 + rng.integers(0, 10, n)
    rel = rng.poisson(loc / 8)
    rea = rng.poisson(loc / 4)
    perf = rng.poisson(0.3, n)
    sec = (rng.random(n) < 0.05).astype(int)
    cols = [
        rng.normal(0, 3, n).round(),
        np.exp(rng.normal(7, 1.5, n)).round(),
        rng.poisson(2, n) + 1,
        rng.poisson(1, n),
        rng.normal(2, 2, n).round(),
        code_length, code_spaces, loc,
        rng.integers(1, 4, n),
        rng.integers(0, 2, n),
        rel, rea, perf, sec, rel + rea + perf + sec,
    ]
    return DataTable(TABLE_COLUMNS, [np.asarray(c, dtype=float) for c in cols])


def friedman1(n=1000, sigma=1.0, seed=0) -> DataTable:
    rng = np.random.default_rng(seed)
    x = rng.random((n, 10))
    y = (10 * np.sin(np.pi * x[:, 0] * x[:, 1]) + 20 * (x[:, 2] - 0.5) ** 2 + 10 * x[:, 3] + 5 * x[:, 4]
         + rng.normal(0, sigma, n))
    names = [f"x{i + 1}" for i in range(10)] + ["y"]
    return DataTable.from_matrix(names, np.column_stack([x, y]))


@pytest.fixture
def small_code_table():
    return code_table()
