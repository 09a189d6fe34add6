import numpy as np
import pytest

from conftest import code_table, friedman1
from regbench import harness, learners
from regbench.errors import InputError
from regbench.learners import LearnerConfig
from regbench.stats import rmse


def test_fold_sizes_and_partition():
    plan = harness.make_folds(103, 10, seed=1)
    assert sorted(plan.fold_sizes()) == [10] * 7 + [11] * 3
    allrows = np.sort(np.concatenate([plan.test_indices(f) for f in range(10)]))
    assert allrows.tolist() == list(range(103))


def test_folds_are_seeded():
    assert harness.make_folds(50, 5, 3) == harness.make_folds(50, 5, 3)
    assert harness.make_folds(50, 5, 3) != harness.make_folds(50, 5, 4)
    with pytest.raises(InputError):
        harness.make_folds(5, 10, 0)


def test_cross_validate_matches_hand_loop():
    t = friedman1(150, 1.0, seed=3)
    cfg = LearnerConfig("cart", {"max_depth": 3, "min_obs": 5})
    plan = harness.make_folds(t.n_rows, 5, seed=9)
    got = harness.cross_validate(t, "y", cfg, plan)
    expected = []
    for f in range(5):
        test_mask = np.asarray(plan.assignment) == f
        train = t.take(np.flatnonzero(~test_mask))
        test = t.take(np.flatnonzero(test_mask))
        model = learners.fit(cfg, train, "y")
        expected.append(rmse(model.predict(test), test.column("y")))
    assert np.allclose(got, expected, rtol=0, atol=1e-12)


def test_default_grids_have_twenty_entries():
    for learner in learners.LEARNERS:
        grid = harness.default_grid(learner)
        assert len(grid) == 20
        assert all(c.learner == learner for c in grid)
    assert max(c.params["num_trees"] for c in harness.default_grid("gbm", max_trees=500)) <= 500


def test_tune_ties_go_to_first_candidate():
    t = code_table(120, seed=2)
    res = harness.tune(t, "total_violations", "linear", shared_seed=4, k=5)
    assert res.best_index == 0
    assert len(set(res.mean_rmse)) == 1


def test_tune_picks_lowest_mean():
    t = friedman1(200, 1.0, seed=5)
    grid = [LearnerConfig("cart", {"max_depth": d, "min_obs": 5}) for d in (1, 4)]
    res = harness.tune(t, "y", "cart", grid, shared_seed=0, k=5)
    assert res.best_index == int(np.argmin(res.mean_rmse))
    assert res.best.params["max_depth"] == 4


def test_evaluate_report_shape_and_linear_glm_equality():
    t = code_table(150, seed=8)
    configs = [LearnerConfig("linear"), LearnerConfig("glm"), LearnerConfig("cart", {"max_depth": 3})]
    rep = harness.evaluate(t, "total_violations", configs, k=10, repeat_seeds=(1, 2))
    assert all(len(o.samples) == 20 for o in rep.outcomes)
    assert rep.outcome("linear").samples == rep.outcome("glm").samples
    d = rep.to_dict()
    assert set(d) >= {"dataset_fingerprint", "learners", "kruskal", "ranking", "repeat_seeds", "k"}
    assert d["ranking"] == sorted(d["ranking"], key=lambda tag: rep.outcome(tag).mean)
    assert rep.outcome("cart").sd == pytest.approx(np.std(rep.outcome("cart").samples, ddof=1))


def test_thread_count_does_not_change_samples():
    t = friedman1(120, 1.0, seed=1)
    configs = [LearnerConfig("gbm", {"num_trees": 10}, seed=3), LearnerConfig("linear")]
    a = harness.evaluate(t, "y", configs, 5, (1, 2), threads=1).to_dict()
    b = harness.evaluate(t, "y", configs, 5, (1, 2), threads=6).to_dict()
    assert a == b


def test_evaluate_input_checks():
    t = code_table(60)
    with pytest.raises(InputError):
        harness.evaluate(t, "total_violations", [LearnerConfig("linear")])
    with pytest.raises(InputError):
        harness.evaluate(t, "total_violations", [LearnerConfig("linear"), LearnerConfig("linear")])
    with pytest.raises(InputError):
        harness.evaluate(t, "total_violations", [LearnerConfig("linear"), LearnerConfig("glm")], repeat_seeds=(1, 1))


def test_resolve_threads(monkeypatch):
    monkeypatch.setenv("REGBENCH_THREADS", "3")
    assert harness.resolve_threads() == 3
    assert harness.resolve_threads(2) == 2
    with pytest.raises(InputError):
        harness.resolve_threads(0)


@pytest.mark.parametrize("learner", ["gbm", "xgb"])
def test_tune_shared_prefix_fits_match_separate_fits(learner):
    t = friedman1(120, 1.0, seed=4)
    grid = harness.default_grid(learner, max_trees=24, seed=3)
    result = harness.tune(t, "y", learner, grid, shared_seed=2, k=4)
    plan = harness.make_folds(t.n_rows, 4, 2)
    for cfg, mean in zip(grid, result.mean_rmse):
        assert mean == float(np.mean(harness.cross_validate(t, "y", cfg, plan)))


def test_staged_predict_equals_truncated_model():
    t = friedman1(80, 1.0, seed=6)
    model = learners.fit(LearnerConfig("gbm", {"num_trees": 12, "bag_fraction": 0.7}, 5), t, "y")
    short = learners.fit(LearnerConfig("gbm", {"num_trees": 5, "bag_fraction": 0.7}, 5), t, "y")
    x = t.matrix(model.feature_names)
    stages = model.staged_predict(x, [5, 12, 0])
    assert np.array_equal(stages[5], short.predict(t))
    assert np.array_equal(stages[12], model.predict(t))
    assert np.all(stages[0] == model.init)
