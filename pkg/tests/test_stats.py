import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps
from scipy.special import betainc as sp_betainc

from facegrowth.stats import betainc, mean_std, one_sample_t_test, t_from_summary, t_sf


@given(st.floats(0.05, 200), st.floats(0.05, 200), st.floats(0, 1))
def test_betainc_matches_scipy(a, b, x):
    assert betainc(a, b, x) == pytest.approx(float(sp_betainc(a, b, x)), rel=1e-9, abs=1e-12)


@given(st.floats(-60, 60, allow_nan=False), st.integers(1, 500))
def test_t_sf_matches_scipy(t, df):
    assert t_sf(t, df) == pytest.approx(float(sps.t.sf(t, df)), rel=1e-8, abs=1e-15)


def test_quantile_table_point():
    # tabulated one-sided 5% critical value for 99 degrees of freedom
    assert abs(t_sf(1.6604, 99) - 0.05) < 1e-4


def test_table_cell_recomputation():
    t = t_from_summary(0.7125, 0.0231, 100, 0.6823)
    assert t == pytest.approx(13.07, abs=0.01)
    assert t_sf(t, 99) < 1e-20


def test_mean_equal_reference():
    res = one_sample_t_test([0.4, 0.6, 0.5, 0.3, 0.7], 0.5)
    assert res.t == 0.0 and res.p == pytest.approx(0.5, abs=1e-15)


def test_against_scipy_ttest(rng):
    x = rng.normal(0.7, 0.05, 100)
    ours = one_sample_t_test(x, 0.68)
    ref = sps.ttest_1samp(x, 0.68, alternative="greater")
    assert ours.t == pytest.approx(ref.statistic, rel=1e-12)
    assert ours.p == pytest.approx(ref.pvalue, rel=1e-9)
    two = one_sample_t_test(x, 0.68, two_sided=True)
    assert two.p == pytest.approx(sps.ttest_1samp(x, 0.68).pvalue, rel=1e-9)


def test_zero_spread():
    assert one_sample_t_test([0.8, 0.8], 0.5).p == 0.0
    assert one_sample_t_test([0.5, 0.5], 0.5).t == 0.0
    low = one_sample_t_test([0.4, 0.4], 0.5)
    assert low.t == -math.inf and low.p == 1.0


def test_mean_std_sample_convention():
    m, s = mean_std([1.0, 2.0, 3.0, 4.0])
    assert m == 2.5 and s == pytest.approx(np.std([1, 2, 3, 4], ddof=1), abs=1e-15)


def test_input_errors():
    with pytest.raises(ValueError):
        one_sample_t_test([1.0], 0.0)
    with pytest.raises(ValueError):
        betainc(0, 1, 0.5)
    with pytest.raises(ValueError):
        t_sf(1.0, 0)
