import logging

import numpy as np
from pytest import approx, mark, raises

from tailflation.exceptions import ConfigurationError, ExplosiveConfigurationError
from tailflation.model_selection import best_subset
from tailflation.synthetic import (
    LocationScaleParams, NkpcParams, Noise, PcExpParams, lopez_frame, lopez_template, nkpc_slope, simulate_location_scale,
    simulate_nkpc, simulate_pc_exp
)
from tailflation.timeseries import Period
from tests.unittest.util import assert_logs


@mark.parametrize('theta', [0.1, 0.25, 0.5, 0.75, 0.9])
@mark.parametrize('beta', [0.9, 0.95, 0.99, 1.0])
def test_nkpc_slope_grid(theta, beta):
    assert nkpc_slope(theta, beta) == approx((1 / theta) * (1 - theta) * (1 - beta * theta), rel=1e-12, abs=1e-12)


def test_nkpc_slope_reference():
    assert nkpc_slope(0.75, 0.99) == approx(0.25 * 0.2575 / 0.75, abs=1e-12)
    assert NkpcParams().slope == approx(0.0858333333333, abs=1e-12)


def test_nkpc_without_shocks_is_flat():
    frame = simulate_nkpc(NkpcParams(shock_scale=0.0, initial_gap=0.0, T=50))
    assert list(frame) == ['inflation', 'gap', 'expectations', 'imported']
    assert np.all(frame['inflation'].values == 0.0)
    assert np.all(frame['gap'].values == 0.0)


def test_nkpc_least_squares_recovery():
    params = NkpcParams(T=5000, seed=1, expectations_noise=0.002, measurement_noise=0.002)
    frame = simulate_nkpc(params)
    x = np.column_stack((frame['expectations'].values, frame['gap'].values))
    y = frame['inflation'].values
    coefficients, *_ = np.linalg.lstsq(x, y, rcond=None)
    residuals = y - x @ coefficients
    sigma2 = residuals @ residuals / (len(y) - 2)
    se = np.sqrt(np.diag(sigma2 * np.linalg.inv(x.T @ x)))
    assert abs(coefficients[0] - params.beta_discount) <= 4 * se[0]
    assert abs(coefficients[1] - params.slope) <= 4 * se[1]


def test_nkpc_pass_through():
    params = NkpcParams(T=300, seed=2, pass_through=0.3)
    frame = simulate_nkpc(params)
    rebuilt = (params.beta_discount * frame['expectations'].values + params.slope * frame['gap'].values
               + 0.3 * frame['imported'].values)
    assert frame['inflation'].values == approx(rebuilt, abs=1e-15)


@mark.parametrize('kwargs', [
    {'gap_persistence': 1.0},
    {'gap_persistence': -1.2},
    {'imported_persistence': 1.0},
])
def test_nkpc_nonstationary(kwargs):
    with raises(ExplosiveConfigurationError):
        NkpcParams(**kwargs)


@mark.parametrize('kwargs', [
    {'theta': 0.0},
    {'theta': 1.0},
    {'beta_discount': 1.1},
    {'shock_scale': -0.1},
    {'T': 0},
])
def test_nkpc_invalid(kwargs):
    with raises(ConfigurationError):
        NkpcParams(**kwargs)


def test_pc_exp_fixed_point():
    frame = simulate_pc_exp(PcExpParams(beta=1.0, lambda_=0.0, gamma=0.0, initial_history=(0.02,) * 4, T=30))
    assert frame['inflation'].values == approx(np.full(30, 0.02), abs=1e-15)
    assert frame['expectations'].values == approx(np.full(30, 0.02), abs=1e-15)


def test_pc_exp_impulse_response():
    T = 20
    z = np.zeros(T)
    z[10] = 1.0
    frame = simulate_pc_exp(PcExpParams(beta=0.5, lambda_=0.1, gamma=1.0, gap=(0.0,) * T, z=tuple(z), T=T))
    inflation = frame['inflation'].values
    assert np.all(inflation[:10] == 0.0)
    assert inflation[10] == 1.0
    assert inflation[11] == approx(0.125)
    assert inflation[12] == approx(0.5 * 1.125 / 4)
    history = [0.0] * 4 + [0.0] * 10 + [1.0]
    for t in range(11, 19):
        history.append(0.5 * sum(history[-4:]) / 4)
        assert inflation[t] == approx(history[-1], rel=1e-12)
    assert np.all(np.diff(inflation[14:19]) < 0)


def test_pc_exp_without_expectations():
    params = PcExpParams(beta=0.0, lambda_=0.3, gamma=0.2, T=60, seed=5)
    frame = simulate_pc_exp(params)
    expected = 0.3 * frame['gap'].values + 0.2 * frame['imported'].values
    assert frame['inflation'].values == approx(expected, abs=1e-15)


def test_pc_exp_explosive():
    with raises(ExplosiveConfigurationError):
        PcExpParams(beta=1.5)
    with raises(ExplosiveConfigurationError):
        simulate_pc_exp(PcExpParams(beta=1.0, shock_scale=100.0, T=100))


def test_pc_exp_supplied_series_length():
    with raises(ConfigurationError):
        PcExpParams(T=10, gap=(0.0,) * 9)
    with raises(ConfigurationError):
        PcExpParams(initial_history=(0.0, 0.0))


def test_location_scale_truth():
    _, truth = simulate_location_scale(LocationScaleParams(T=10))
    assert truth.coefficients(0.9) == approx([1.4, 2.08])
    assert truth([0.5], 0.9) == approx(1.4 + 2.08 * 0.5)
    assert truth.coefficients(0.5) == approx([1.0, 2.0])


def test_location_scale_homoskedastic_slopes():
    _, truth = simulate_location_scale(LocationScaleParams(g=(0.3, 0.0), noise=Noise.normal(), T=10))
    for tau in (0.05, 0.5, 0.95):
        assert truth.coefficients(tau)[1] == approx(2.0)
    assert truth.coefficients(0.5) == approx([1.0, 2.0])


def test_true_quantile_is_monotone():
    _, truth = simulate_location_scale(LocationScaleParams(T=10))
    taus = np.linspace(0.01, 0.99, 50)
    for x in (0.0, 0.3, 1.0):
        values = [truth([x], tau) for tau in taus]
        assert np.all(np.diff(values) > 0)


def test_location_scale_frame():
    frame, _ = simulate_location_scale(LocationScaleParams(b=(1, 2, 3), g=(1, 0, 0), T=100, start=Period(1995, 2)))
    assert list(frame) == ['y', 'x1', 'x2']
    assert frame['y'].start == Period(1995, 2)
    assert len(frame['x2']) == 100
    assert np.all((frame['x1'].values >= 0) & (frame['x1'].values <= 1))


def test_location_scale_nonpositive_scale():
    with raises(ConfigurationError):
        simulate_location_scale(LocationScaleParams(g=(-0.5, 0.1)))
    with raises(ConfigurationError):
        LocationScaleParams(b=(1, 2), g=(1,))


@mark.parametrize('simulate, params', [
    (simulate_nkpc, NkpcParams(seed=7, expectations_noise=0.01)),
    (simulate_pc_exp, PcExpParams(seed=7, shock_scale=0.01)),
    (lambda p: simulate_location_scale(p)[0], LocationScaleParams(seed=7, T=100)),
])
def test_deterministic(simulate, params):
    first = simulate(params)
    second = simulate(params)
    assert list(first) == list(second)
    for name in first:
        assert np.array_equal(first[name].values, second[name].values)


def test_seeds_differ():
    a = simulate_nkpc(NkpcParams(seed=1))
    b = simulate_nkpc(NkpcParams(seed=2))
    assert not np.array_equal(a['gap'].values, b['gap'].values)


def _lopez_input(T=200, seed=3):
    return lopez_frame(simulate_nkpc(NkpcParams(T=T, seed=seed, pass_through=0.2, expectations_noise=0.002,
                                                measurement_noise=0.002)))


def test_lopez_template_roles():
    template = lopez_template()
    assert len(template.roles) == 5
    assert [role.name for role in template.roles if role.optional] == ['credit_spread']


def test_lopez_template_omits_optional_role(caplog):
    with assert_logs(caplog, logging.INFO, 'optional template roles omitted'):
        pool, omitted = lopez_template().to_pool(_lopez_input())
    assert len(pool) == 4
    assert omitted == ('credit_spread',)


def test_lopez_template_with_credit_spread():
    frame = _lopez_input()
    frame = frame.with_series('credit_spread', frame['gap'].map(lambda v: 0.5 * v + 0.01))
    pool, omitted = lopez_template().to_pool(frame)
    assert len(pool) == 5
    assert omitted == ()


def test_lopez_template_missing_required_role():
    frame = simulate_nkpc(NkpcParams(T=20))
    with raises(ConfigurationError):
        lopez_template().to_pool(frame)


def test_lopez_template_end_to_end():
    frame = _lopez_input()
    assert frame['inflation_trailing_mean'].start == frame['inflation'].start.shift(4)
    pool, _ = lopez_template().to_pool(frame)
    result = best_subset(frame, 'inflation', pool, 0.5)
    assert result.subset
    assert set(result.subset) <= set(pool.column_names)
