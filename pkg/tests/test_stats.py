import math

import numpy as np
import pytest
import scipy.special
import scipy.stats
from hypothesis import given, settings, strategies as st

from regbench import _special, stats
from regbench.datamodel import DataTable
from regbench.errors import CollinearityError, DegenerateColumnError, InputError


def test_skewness_hand_value():
    # mean 3.25, m2 = 14.6875, m3 = 3 * 0.75**3... computed directly
    x = np.array([1.0, 1.0, 1.0, 10.0])
    d = x - x.mean()
    expected = np.mean(d**3) / np.mean(d**2) ** 1.5
    assert stats.skewness(x) == pytest.approx(expected, rel=1e-14)
    assert stats.skewness(x) == pytest.approx(1.1547005383792517, rel=1e-12)
    assert stats.skewness([1, 2, 3, 4, 5]) == 0.0


def test_skewness_degenerate():
    with pytest.raises(DegenerateColumnError):
        stats.skewness([2, 2, 2])
    with pytest.raises(InputError):
        stats.skewness([1, 2])


def test_effect_labels():
    assert stats.effect_label(0.96) == "high"
    assert stats.effect_label(-0.5) == "high"
    assert stats.effect_label(0.33) == "medium"
    assert stats.effect_label(0.495) == "medium"
    assert stats.effect_label(0.28) == "negligible"


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=3, max_size=60))
def test_kendall_matches_scipy(pairs):
    x = np.array([p[0] for p in pairs], dtype=float)
    y = np.array([p[1] for p in pairs], dtype=float)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        with pytest.raises(DegenerateColumnError):
            stats.kendall_tau_b(x, y)
        return
    cell = stats.kendall_tau_b(x, y)
    ref = scipy.stats.kendalltau(x, y, variant="b", method="asymptotic")
    assert cell.tau == pytest.approx(ref.statistic, abs=1e-12)
    assert cell.p_value == pytest.approx(ref.pvalue, rel=1e-8, abs=1e-14)


def test_kendall_perfect_and_reversed():
    x = np.arange(10.0)
    assert stats.kendall_tau_b(x, x).tau == 1.0
    assert stats.kendall_tau_b(x, -x).tau == -1.0


def test_correlation_matrix_layout():
    t = DataTable.from_dict({"a": [1, 2, 3, 4], "b": [2, 1, 4, 3], "c": [4, 3, 2, 1]})
    m = stats.correlation_matrix(t)
    assert m["columns"] == ["a", "b", "c"]
    assert set(m["cells"]) == {"a|b", "a|c", "b|c"}
    assert m["cells"]["a|c"]["tau"] == -1.0


def test_rmse():
    assert stats.rmse([1, 2, 3], [1, 2, 3]) == 0.0
    assert stats.rmse([0, 0], [3, 4]) == pytest.approx(math.sqrt(12.5))
    with pytest.raises(InputError):
        stats.rmse([1], [1, 2])


def test_ols_four_point_hand_solution():
    # y = 1 + 2x exactly except the last point; normal equations solved by hand
    x = np.array([0.0, 1.0, 2.0, 3.0])
    y = np.array([1.0, 3.0, 5.0, 8.0])
    # sxx = 5, sxy = 11.5 -> slope 2.3, intercept 4.25 - 2.3*1.5 = 0.8
    rep = stats.ols_fit(x, y, ["x"])
    assert rep.intercept == pytest.approx(0.8, abs=1e-12)
    assert rep.coefficient("x") == pytest.approx(2.3, abs=1e-12)
    resid = y - rep.predict(x[:, None])
    sse = float(resid @ resid)
    assert rep.r_squared == pytest.approx(1 - sse / np.sum((y - y.mean()) ** 2))
    assert rep.df_model == 1 and rep.df_residual == 2


def test_ols_residuals_orthogonal_and_f_pvalue():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(80, 3))
    y = x @ [1.0, -2.0, 0.5] + rng.normal(size=80)
    rep = stats.ols_fit(x, y)
    resid = y - rep.predict(x)
    design = np.column_stack([np.ones(80), x])
    assert np.max(np.abs(design.T @ resid)) < 1e-10
    ref = scipy.stats.f.sf(rep.f_statistic, 3, 76)
    assert rep.p_value == pytest.approx(ref, rel=1e-8, abs=1e-300)
    d = rep.to_dict()
    assert d["predictors"] == ["x1", "x2", "x3"]


def test_ols_collinearity():
    x = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0], [5.0, 10.0]])
    with pytest.raises(CollinearityError):
        stats.ols_fit(x, [1, 2, 3, 4, 6])


def test_midranks():
    assert stats.midranks([10, 20, 20, 30]).tolist() == [1.0, 2.5, 2.5, 4.0]


def test_kruskal_matches_scipy_h_and_asymptotic_p():
    rng = np.random.default_rng(4)
    groups = [np.round(rng.normal(m, 1, 20), 1) for m in (0, 0.3, 1.0)]
    res = stats.kruskal_wallis(groups, ["a", "b", "c"])
    ref = scipy.stats.kruskal(*groups)
    assert res.p_method == "asymptotic"
    assert res.h_statistic == pytest.approx(ref.statistic, rel=1e-12)
    assert res.p_value == pytest.approx(ref.pvalue, rel=1e-9)
    assert res.df == 2


def test_dunn_z_hand_formula_and_bonferroni():
    groups = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0, 9.0]]
    res = stats.kruskal_wallis(groups, ["a", "b", "c"], method="asymptotic")
    n = 10
    ranks = stats.midranks(np.concatenate(groups))
    r_a, r_c = ranks[:3].mean(), ranks[6:].mean()
    var = (n * (n + 1) / 12 - (2**3 - 2) / (12 * (n - 1))) * (1 / 3 + 1 / 4)
    z = (r_a - r_c) / math.sqrt(var)
    pair = res.pair("a", "c")
    assert pair.z == pytest.approx(z, rel=1e-12)
    assert pair.p_adj == pytest.approx(min(1.0, 3 * 2 * scipy.stats.norm.sf(abs(z))), rel=1e-9)
    assert res.pair("c", "a").z == -pair.z


def test_identical_groups_give_null_result():
    res = stats.kruskal_wallis([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]], ["linear", "glm"])
    assert res.h_statistic == 0.0 and res.p_value == 1.0
    assert res.pair("linear", "glm").z == 0.0 and res.pair("linear", "glm").p_adj == 1.0
    flat = stats.kruskal_wallis([[2.0, 2.0], [2.0, 2.0]])
    assert flat.h_statistic == 0.0 and flat.p_value == 1.0


def test_exact_p_agrees_with_monte_carlo():
    rng = np.random.default_rng(8)
    groups = [rng.normal(0, 1, 5), rng.normal(0.8, 1, 4), rng.normal(1.5, 1, 5)]
    res = stats.kruskal_wallis(groups, method="exact")
    ranks = stats.midranks(np.concatenate(groups))
    n, draws = ranks.size, 50000
    perms = rng.permuted(np.tile(ranks, (draws, 1)), axis=1)
    sums = [perms[:, :5].sum(1), perms[:, 5:9].sum(1), perms[:, 9:].sum(1)]
    h = 12 / (n * (n + 1)) * (sums[0] ** 2 / 5 + sums[1] ** 2 / 4 + sums[2] ** 2 / 5) - 3 * (n + 1)
    mc = float(np.mean(h >= res.h_statistic - 1e-9))
    assert abs(res.p_value - mc) < 4 * math.sqrt(mc * (1 - mc) / draws) + 1e-3


def test_bonferroni_caps_at_one():
    assert stats.bonferroni([0.01, 0.5], 15) == [0.15, 1.0]


@pytest.mark.parametrize("a,x", [(0.5, 0.1), (1.0, 1.0), (2.5, 3.0), (5.0, 2.0), (10.0, 12.0), (2.0, 40.0)])
def test_incomplete_gamma_against_scipy(a, x):
    assert _special.gammaincc(a, x) == pytest.approx(scipy.special.gammaincc(a, x), rel=1e-10)
    if x < a + 1:
        assert 1 - _special.gammainc_series(a, x) == pytest.approx(scipy.special.gammaincc(a, x), rel=1e-10)
    else:
        assert _special.gammaincc_cf(a, x) == pytest.approx(scipy.special.gammaincc(a, x), rel=1e-10)


def test_series_and_continued_fraction_agree_near_switch():
    for a in (1.0, 3.0, 7.5):
        x = a + 1
        assert 1 - _special.gammainc_series(a, x) == pytest.approx(_special.gammaincc_cf(a, x), rel=1e-10)


def test_chi2_and_normal_tails():
    assert _special.chi2_sf(104.70, 5) == pytest.approx(scipy.stats.chi2.sf(104.70, 5), rel=1e-9)
    assert _special.two_sided_normal_p(1.96) == pytest.approx(2 * scipy.stats.norm.sf(1.96), rel=1e-12)
