import io
import math

import numpy as np
import pytest

from spateco.errors import InsufficientDataError, RankError
from spateco.growth import (
    cobb_douglas_eval,
    cobb_douglas_fit,
    group_ols,
    simple_ols,
)
from spateco.panel import load_panel
from conftest import panel_csv_text


def test_eval_alpha_boundaries():
    a, k = 3.0, 7.0
    assert cobb_douglas_eval(a, k, alpha=0.0) == pytest.approx(a)
    assert cobb_douglas_eval(a, k, alpha=1.0) == pytest.approx(k)


def test_eval_geometric_mean():
    assert cobb_douglas_eval(4.0, 9.0, alpha=0.5) == pytest.approx(6.0, abs=1e-12)


def test_eval_modes():
    assert cobb_douglas_eval(3.0, 5.0, mode="product") == 15.0
    assert cobb_douglas_eval(2.0, 3.0, mode="as_published") == 8.0


def test_eval_domain_errors():
    with pytest.raises(ValueError, match="mode"):
        cobb_douglas_eval(1.0, 1.0, mode="nope")
    with pytest.raises(ValueError, match="alpha"):
        cobb_douglas_eval(1.0, 1.0, alpha=1.5)
    with pytest.raises(ValueError, match="requires"):
        cobb_douglas_eval(-1.0, 2.0)
    with pytest.raises(ValueError, match="requires"):
        cobb_douglas_eval(-1.0, 2.0, mode="as_published")


def test_eval_homogeneity_degree_one():
    rng = np.random.default_rng(50)
    a = rng.uniform(0.5, 5.0, size=30)
    k = rng.uniform(0.5, 5.0, size=30)
    for t in (0.3, 2.0, 11.5):
        lhs = cobb_douglas_eval(t * a, t * k, alpha=0.37)
        rhs = t * cobb_douglas_eval(a, k, alpha=0.37)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


def test_eval_log_linearity():
    rng = np.random.default_rng(51)
    a = rng.uniform(0.5, 5.0, size=30)
    k = rng.uniform(0.5, 5.0, size=30)
    alpha = 0.62
    y = cobb_douglas_eval(a, k, alpha=alpha)
    np.testing.assert_allclose(
        np.log(y), alpha * np.log(k) + (1 - alpha) * np.log(a), atol=1e-12)


def test_fit_recovers_alpha_noiseless():
    rng = np.random.default_rng(52)
    a = rng.uniform(1.0, 10.0, size=40)
    k = rng.uniform(1.0, 10.0, size=40)
    y = 2.5 * cobb_douglas_eval(a, k, alpha=0.3)
    fit = cobb_douglas_fit(y, a, k)
    assert fit.alpha == pytest.approx(0.3, abs=1e-8)
    assert fit.scale == pytest.approx(2.5, abs=1e-8)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-10)
    assert fit.residual_sd == pytest.approx(0.0, abs=1e-8)
    assert fit.unconstrained["k_exponent"] == pytest.approx(0.3, abs=1e-6)
    assert fit.unconstrained["a_exponent"] == pytest.approx(0.7, abs=1e-6)


def test_fit_recovers_alpha_noisy():
    rng = np.random.default_rng(53)
    a = rng.uniform(1.0, 10.0, size=400)
    k = rng.uniform(1.0, 10.0, size=400)
    y = cobb_douglas_eval(a, k, alpha=0.45) * np.exp(rng.normal(scale=0.05, size=400))
    fit = cobb_douglas_fit(y, a, k)
    assert fit.alpha == pytest.approx(0.45, abs=0.05)


def test_fit_alpha_clipped_to_unit_interval():
    rng = np.random.default_rng(54)
    a = rng.uniform(1.0, 10.0, size=50)
    k = rng.uniform(1.0, 10.0, size=50)
    y = k**2.0 / a  # true exponent 2 lies outside [0, 1]
    fit = cobb_douglas_fit(y, a, k)
    assert fit.alpha == 1.0


def test_fit_collinear_factors_rejected():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    with pytest.raises(RankError):
        cobb_douglas_fit(a * 2, a, a)


def test_fit_proportional_factors_unconstrained_note():
    a = np.array([1.5, 2.0, 3.0, 4.0])
    k = a**2  # log K = 2 log A: constrained fit works, two-exponent fit cannot
    y = cobb_douglas_eval(a, k, alpha=0.4)
    fit = cobb_douglas_fit(y, a, k)
    assert fit.alpha == pytest.approx(0.4, abs=1e-8)
    assert "error" in fit.unconstrained


def test_fit_requires_positive_and_enough_data():
    with pytest.raises(InsufficientDataError):
        cobb_douglas_fit([1.0, 2.0], [1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ValueError, match="positive"):
        cobb_douglas_fit([1.0, -2.0, 3.0], [1.0, 2.0, 3.0], [1.0, 2.0, 4.0])


def test_fit_eval_roundtrip():
    rng = np.random.default_rng(55)
    a = rng.uniform(1.0, 5.0, size=25)
    k = rng.uniform(1.0, 5.0, size=25)
    y = 1.7 * cobb_douglas_eval(a, k, alpha=0.8)
    fit = cobb_douglas_fit(y, a, k)
    rebuilt = fit.scale * cobb_douglas_eval(a, k, alpha=fit.alpha)
    np.testing.assert_allclose(rebuilt, y, rtol=1e-8)


def test_simple_ols_hand_oracle():
    # x = 1..5, y = 2x + 1 with a bump: slope/intercept from the textbook formulas
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    y = np.array([3.0, 5.0, 7.0, 9.0, 12.0])
    sxx = np.sum((x - x.mean()) ** 2)
    sxy = np.sum((x - x.mean()) * (y - y.mean()))
    fit = simple_ols(x, y)
    assert fit["slope"] == pytest.approx(sxy / sxx, abs=1e-10)
    assert fit["intercept"] == pytest.approx(y.mean() - sxy / sxx * x.mean(), abs=1e-10)


def test_r_squared_equals_corr_squared():
    rng = np.random.default_rng(56)
    for _ in range(100):
        n = int(rng.integers(3, 40))
        x = rng.normal(size=n)
        while np.ptp(x) == 0:
            x = rng.normal(size=n)
        y = rng.normal(size=n)
        fit = simple_ols(x, y)
        r = np.corrcoef(x, y)[0, 1]
        assert fit["r_squared"] == pytest.approx(r * r, abs=1e-12)


def test_simple_ols_affine_invariance():
    rng = np.random.default_rng(57)
    x = rng.normal(size=30)
    y = rng.normal(size=30)
    base = simple_ols(x, y)
    shifted = simple_ols(x + 100.0, y)
    assert shifted["slope"] == pytest.approx(base["slope"], abs=1e-9)
    assert shifted["r_squared"] == pytest.approx(base["r_squared"], abs=1e-9)
    assert shifted["p_value"] == pytest.approx(base["p_value"], abs=1e-9)


def test_simple_ols_preconditions():
    with pytest.raises(InsufficientDataError):
        simple_ols([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(RankError):
        simple_ols([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])


def _dataset(nrows=3, ncols=3):
    return load_panel(io.StringIO(panel_csv_text(nrows=nrows, ncols=ncols)))


def test_group_ols_pooled_perfect_pair():
    ds = _dataset()
    # build a perfectly linear response from the predictor
    vals = np.array(ds.values)
    jp = ds.indicators.index("TIC")
    jr = ds.indicators.index("PIB")
    vals[:, jr, :] = 3.0 * vals[:, jp, :] - 1.0
    perfect = type(ds)(ds.regions, ds.indicators, ds.years, vals)
    reports = group_ols(perfect, [("TIC", "PIB")], years=[2010],
                        grouping="mesoregion")
    assert len(reports) == 1
    rep = reports[0]
    assert rep.group == "all"
    assert rep.slope == pytest.approx(3.0, abs=1e-10)
    assert rep.intercept == pytest.approx(-1.0, abs=1e-9)
    assert rep.r_squared == pytest.approx(1.0, abs=1e-12)
    assert rep.p_value < 1e-15
    assert rep.n == 9


def test_group_ols_microregion_rows_sorted():
    ds = _dataset()
    pairs = [("TIC", "PIB"), ("CBO", "PIB")]
    reports = group_ols(ds, pairs, years=[2009, 2010])
    keys = [(r.group, pairs.index((r.predictor, r.response)), r.year)
            for r in reports]
    assert keys == sorted(keys)
    assert {r.group for r in reports} == {"M0", "M1", "M2"}
    assert len(reports) == 3 * 2 * 2


def test_group_ols_null_row_on_small_group():
    ds = _dataset(nrows=2, ncols=2)  # microregions of size 2 and 1
    reports = group_ols(ds, [("TIC", "PIB")], years=[2009])
    noted = [r for r in reports if r.note]
    assert noted
    for r in noted:
        assert math.isnan(r.slope)
        assert ">= 3" in r.note


def test_group_ols_unknown_grouping():
    with pytest.raises(ValueError, match="grouping"):
        group_ols(_dataset(), [("TIC", "PIB")], grouping="state")
