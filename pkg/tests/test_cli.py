import json
import subprocess
import sys
from pathlib import Path

import pytest

from conftest import code_table
from regbench import cli
from regbench.datamodel import load_csv
from regbench.plots import read_samples_csv

DATA = Path(__file__).parent / "data"


def run(*argv):
    return cli.run([str(a) for a in argv])


def test_extract_and_join_reproduce_fixture(tmp_path):
    assert run("extract", "--posts", DATA / "five_posts.csv", "--out-dir", tmp_path / "snips",
               "--features", tmp_path / "features.csv") == 0
    assert sorted(p.name for p in (tmp_path / "snips").iterdir()) == [f"C{i}.java" for i in range(1, 7)]
    assert run("join", "--features", tmp_path / "features.csv", "--violations", DATA / "five_violations.csv",
               "--posts", DATA / "five_posts.csv", "--out", tmp_path / "table.csv") == 0
    assert load_csv(tmp_path / "table.csv") == load_csv(DATA / "five_table_expected.csv")


@pytest.fixture
def table_csv(tmp_path):
    path = tmp_path / "table.csv"
    code_table(300, seed=5).write_csv(path)
    return path


def test_full_pipeline(tmp_path, table_csv):
    t, recipe = tmp_path / "t.csv", tmp_path / "recipe.json"
    assert run("transform", "--in", table_csv, "--response", "total_violations", "--out", t, "--recipe", recipe) == 0
    rdoc = json.loads(recipe.read_text())
    assert rdoc["tool"]["name"] == "regbench" and str(table_csv) in rdoc["inputs"]
    assert {c["transform"] for c in rdoc["recipe"]} <= {"none", "log", "sqrt"}

    assert run("correlate", "--in", table_csv, "--out", tmp_path / "corr.json") == 0
    corr = json.loads((tmp_path / "corr.json").read_text())["kendall"]
    assert len(corr["cells"]) == 15 * 14 // 2

    assert run("baseline", "--in", t, "--response", "total_violations", "--recipe", recipe,
               "--out", tmp_path / "base.json") == 0
    raw_base = tmp_path / "base_raw.json"
    assert run("baseline", "--in", table_csv, "--response", "total_violations", "--out", raw_base) == 0
    a = json.loads((tmp_path / "base.json").read_text())["ols"]
    b = json.loads(raw_base.read_text())["ols"]
    assert a["r_squared"] == pytest.approx(b["r_squared"], rel=1e-12)

    configs = []
    for learner in ("linear", "glm", "cart", "gbm"):
        out = tmp_path / f"best_{learner}.json"
        assert run("tune", "--in", t, "--response", "total_violations", "--learner", learner, "--seed", 7,
                   "--folds", 5, "--max-trees", 40, "--out", out) == 0
        configs.append(out)
    report = tmp_path / "report.json"
    assert run("evaluate", "--in", t, "--response", "total_violations", "--configs", *configs,
               "--folds", 10, "--seeds", "1,2", "--out", report) == 0
    rep = json.loads(report.read_text())
    assert rep["shared_tuning_seed"] == 7
    assert [len(e["rmse_samples"]) for e in rep["learners"]] == [20] * 4
    pair = [p for p in rep["kruskal"]["pairwise"] if {p["a"], p["b"]} == {"linear", "glm"}][0]
    assert pair["z"] == 0 and pair["p_adj"] == 1
    assert "threads" not in rep["run_config"]

    assert run("report", "--in", report, "--format", "csv", "--out", tmp_path / "fig5") == 0
    samples = read_samples_csv((tmp_path / "fig5.csv").read_text())
    assert samples == {e["tag"]: e["rmse_samples"] for e in rep["learners"]}
    assert run("report", "--in", report, "--format", "svg", "--out", tmp_path / "fig5.svg") == 0
    svg = (tmp_path / "fig5.svg").read_text()
    assert svg.startswith("<svg") and svg.count('class="box"') == 4


def test_exit_codes(tmp_path, table_csv, capsys):
    assert run("tune", "--in", table_csv, "--response", "total_violations", "--learner", "nope",
               "--out", tmp_path / "x.json") == 1
    assert "usage" in capsys.readouterr().err
    assert run("correlate", "--in", tmp_path / "absent.csv", "--out", tmp_path / "x.json") == 1
    assert run("correlate", "--in", table_csv, "--out", tmp_path / "no" / "dir" / "x.json") == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n,3\n")
    assert run("correlate", "--in", bad, "--out", tmp_path / "x.json") == 1
    const = tmp_path / "const.csv"
    const.write_text("a,b\n1,2\n1,3\n1,5\n")
    assert run("transform", "--in", const, "--response", "b", "--out", tmp_path / "o.csv",
               "--recipe", tmp_path / "r.json") == 2
    assert run() == 1


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "regbench", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "regbench" in out.stdout
