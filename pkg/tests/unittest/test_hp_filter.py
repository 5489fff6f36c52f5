import numpy as np
from pytest import approx, mark, raises

from tailflation.exceptions import ConfigurationError, SmallSampleError
from tailflation.hp_filter import hp_gap, hp_trend
from tailflation.timeseries import Period, QuarterlySeries
from tests.unittest.util import dense_hp_trend


@mark.parametrize('n', [4, 10, 50, 500])
@mark.parametrize('lambda_', [1.0, 1600.0])
def test_matches_dense_solve(n, lambda_):
    rng = np.random.default_rng(n)
    y = 10 + np.cumsum(rng.normal(0.005, 0.01, n))
    trend = hp_trend(y, lambda_)
    expected = dense_hp_trend(y, lambda_)
    assert np.linalg.norm(trend - expected) <= 1e-10 * np.linalg.norm(expected)


@mark.parametrize('n', [4, 10, 50])
def test_constant_and_linear_fixed_points(n):
    constant = np.full(n, 3.5)
    assert hp_trend(constant) == approx(constant, abs=1e-12)
    linear = 2.0 + 0.25 * np.arange(n)
    assert hp_trend(linear) == approx(linear, abs=1e-10)


@mark.parametrize('n', [4, 37, 500])
def test_gap_sums_to_zero(n):
    rng = np.random.default_rng(7)
    y = np.cumsum(rng.normal(size=n))
    result = hp_gap(QuarterlySeries(Period(1991, 1), y))
    assert abs(result.gap.values.sum()) <= 1e-8
    # the gap is also orthogonal to a linear time trend
    assert abs(result.gap.values @ np.arange(n)) <= 1e-8


def test_gap_keeps_periods():
    s = QuarterlySeries(Period(1991, 1), np.log(np.linspace(100, 200, 40)))
    result = hp_gap(s)
    assert result.gap.start == result.trend.start == Period(1991, 1)
    assert result.trend.values + result.gap.values == approx(s.values)
    assert result.lambda_ == 1600.0


def test_too_short():
    with raises(SmallSampleError):
        hp_trend([1.0, 2.0, 3.0])


@mark.parametrize('lambda_', [0.0, -1.0, np.inf])
def test_bad_lambda(lambda_):
    with raises(ConfigurationError):
        hp_trend(np.arange(10.0), lambda_)


def test_large_lambda_approaches_linear_fit():
    rng = np.random.default_rng(1)
    t = np.arange(60.0)
    y = 1 + 0.1 * t + rng.normal(size=60)
    trend = hp_trend(y, 1e12)
    slope, intercept = np.polyfit(t, y, 1)
    assert trend == approx(intercept + slope * t, abs=1e-4)
