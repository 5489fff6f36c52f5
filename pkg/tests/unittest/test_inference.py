import logging
from dataclasses import replace

import numpy as np
from pytest import approx, mark, raises
from scipy.stats import norm

from tailflation import qr_solver
from tailflation.exceptions import BandwidthError, CovarianceError, SingularHessianError
from tailflation.inference import (
    BandwidthRule, CovarianceEstimate, Kernel, bandwidth, bofinger_bandwidth, coefficient_table,
    hall_sheather_bandwidth, powell_covariance, residual_bandwidth
)
from tailflation.qr_solver import QrFit, QuantileLevel
from tailflation.synthetic import LocationScaleParams, simulate_location_scale
from tailflation.timeseries import INTERCEPT, DesignMatrix
from tests.unittest.util import assert_logs, assert_no_logs


def _estimate(design, tau, kernel=Kernel.uniform, alpha=0.05):
    fit = qr_solver.fit(design, tau)
    h = hall_sheather_bandwidth(design.n, tau, alpha, design.p)
    cov = powell_covariance(design, fit, residual_bandwidth(fit, h), kernel)
    return fit, cov, coefficient_table(fit, cov, alpha)


def test_hall_sheather_locked_value():
    assert hall_sheather_bandwidth(100, 0.5) == approx(0.20932, rel=1e-3)


def test_hall_sheather_formula():
    n, tau, alpha = 250, 0.3, 0.1
    q = norm.ppf(tau)
    expected = (norm.ppf(1 - alpha / 2) ** (2 / 3) * (1.5 * norm.pdf(q) ** 2 / (2 * q ** 2 + 1)) ** (1 / 3)
                * n ** (-1 / 3))
    assert hall_sheather_bandwidth(n, tau, alpha) == approx(expected, rel=1e-12)


def test_bandwidth_decreases_with_n():
    values = [hall_sheather_bandwidth(n, 0.5) for n in (50, 100, 500, 2000, 10000)]
    assert values == sorted(values, reverse=True)
    values = [bofinger_bandwidth(n, 0.5) for n in (50, 100, 500, 2000, 10000)]
    assert values == sorted(values, reverse=True)


def test_bandwidth_rule_dispatch():
    assert bandwidth(BandwidthRule.hall_sheather, 300, 0.4) == hall_sheather_bandwidth(300, 0.4)
    assert bandwidth(BandwidthRule.bofinger, 300, 0.4) == bofinger_bandwidth(300, 0.4)
    # the Bofinger rule is wider than Hall-Sheather in moderate samples
    assert bofinger_bandwidth(300, 0.5) > hall_sheather_bandwidth(300, 0.5)


def test_bandwidth_clipped_at_extreme_quantile(caplog):
    with assert_logs(caplog, logging.WARNING, r'bandwidth clipped.*'):
        h = hall_sheather_bandwidth(100, 0.01)
    assert h == approx(0.009)
    assert 0 < 0.01 - h


def test_no_warning_in_the_center(caplog):
    with assert_no_logs(caplog, logging.WARNING):
        hall_sheather_bandwidth(100, 0.5)


@mark.parametrize('n, tau, p', [
    (40, 0.01, 1),
    (10, 0.99, 1),
    (3, 0.5, 2),
])
def test_no_admissible_bandwidth(n, tau, p):
    with raises(BandwidthError):
        hall_sheather_bandwidth(n, tau, p=p)


def test_residual_bandwidth_scale():
    rng = np.random.default_rng(0)
    y = rng.normal(size=400)
    fit = qr_solver.fit(DesignMatrix.from_arrays(y), 0.5)
    h = hall_sheather_bandwidth(400, 0.5)
    r = residual_bandwidth(fit, h)
    q75, q25 = np.quantile(fit.residuals, [0.75, 0.25])
    kappa = min(np.std(fit.residuals, ddof=1), (q75 - q25) / 1.34)
    assert r == approx(kappa * (norm.ppf(0.5 + h) - norm.ppf(0.5 - h)))
    scaled = qr_solver.fit(DesignMatrix.from_arrays(10 * y), 0.5)
    assert residual_bandwidth(scaled, h) == approx(10 * r)


def test_residual_bandwidth_inadmissible():
    fit = qr_solver.fit(DesignMatrix.from_arrays([1.0, 2.0, 4.0, 8.0]), 0.5)
    with raises(BandwidthError):
        residual_bandwidth(fit, 0.6)


@mark.parametrize('kernel', list(Kernel))
def test_median_variance(kernel):
    rng = np.random.default_rng(2000)
    n = 2000
    design = DesignMatrix.from_arrays(rng.standard_normal(n))
    _, cov, _ = _estimate(design, 0.5, kernel)
    expected = 0.25 / (n * norm.pdf(0) ** 2)
    assert cov.matrix[0, 0] == approx(expected, rel=0.25)
    assert cov.kernel is kernel


def test_kernels():
    u = np.array([-2.0, -1.0, 0.0, 0.5, 1.5])
    assert list(Kernel.uniform(u)) == [0.0, 0.5, 0.5, 0.5, 0.0]
    assert Kernel.gaussian(u) == approx(norm.pdf(u))


def test_covariance_is_symmetric():
    frame, _ = simulate_location_scale(LocationScaleParams(b=(1, 2, -1), g=(0.5, 0.1, 0.2), T=300, seed=2))
    design = DesignMatrix.from_arrays(frame['y'].values, np.column_stack((frame['x1'].values, frame['x2'].values)))
    _, cov, _ = _estimate(design, 0.25, Kernel.gaussian)
    assert np.array_equal(cov.matrix, cov.matrix.T)
    assert np.all(np.linalg.eigvalsh(cov.matrix) > 0)


def test_scaling_a_column_scales_its_standard_error():
    frame, _ = simulate_location_scale(LocationScaleParams(T=500, seed=4))
    y, x = frame['y'].values, frame['x1'].values
    _, _, table = _estimate(DesignMatrix.from_arrays(y, x), 0.5)
    _, _, doubled = _estimate(DesignMatrix.from_arrays(y, 2 * x), 0.5)
    assert doubled.row('x1')['estimate'] == approx(table.row('x1')['estimate'] / 2, rel=1e-8)
    assert doubled.row('x1')['std_error'] == approx(table.row('x1')['std_error'] / 2, rel=1e-6)
    assert doubled.row(INTERCEPT)['std_error'] == approx(table.row(INTERCEPT)['std_error'], rel=1e-6)


def test_tiny_bandwidth_is_singular():
    rng = np.random.default_rng(5)
    design = DesignMatrix.from_arrays(rng.normal(size=50), rng.normal(size=50))
    fit = qr_solver.fit(design, 0.5)
    # no residual falls inside the kernel window
    far = replace(fit, residuals=np.where(fit.residuals >= 0, 1.0, -1.0))
    with raises(SingularHessianError):
        powell_covariance(design, far, 1e-3)


def test_nonpositive_bandwidth():
    design = DesignMatrix.from_arrays([1.0, 2.0, 3.0, 5.0])
    fit = qr_solver.fit(design, 0.5)
    with raises(ValueError):
        powell_covariance(design, fit, 0.0)


def _fit(beta):
    beta = np.asarray(beta, dtype=float)
    names = (INTERCEPT,) + tuple(f'x{i}' for i in range(1, len(beta)))
    return QrFit(QuantileLevel(0.5), beta, np.zeros(5), 1.0, 5, len(beta), frozenset(), names)


def test_table_arithmetic():
    fit = _fit([0.4])
    table = coefficient_table(fit, CovarianceEstimate(np.array([[0.04]]), 1.0, Kernel.uniform, 0.5))
    row = table.row(INTERCEPT)
    assert row['std_error'] == approx(0.2)
    assert row['z'] == approx(2.0)
    assert row['p_value'] == approx(2 * norm.sf(2.0))
    assert row['ci_low'] == approx(0.4 - 1.959964 * 0.2, abs=1e-6)
    assert row['ci_high'] == approx(0.4 + 1.959964 * 0.2, abs=1e-6)
    assert table.note


def test_zero_estimate_has_unit_p_value():
    table = coefficient_table(_fit([0.0]), CovarianceEstimate(np.array([[1.0]]), 1.0, Kernel.uniform, 0.5))
    assert table.rows()[0]['p_value'] == 1.0


def test_interval_excludes_zero_iff_significant():
    rng = np.random.default_rng(11)
    for _ in range(20):
        beta = rng.normal(size=3)
        variances = rng.uniform(0.1, 2.0, size=3)
        table = coefficient_table(_fit(beta), CovarianceEstimate(np.diag(variances), 1.0, Kernel.uniform, 0.5))
        for row in table.rows():
            excludes = row['ci_low'] > 0 or row['ci_high'] < 0
            assert excludes == (row['p_value'] < 0.05)


def test_nonpositive_variance():
    with raises(CovarianceError):
        coefficient_table(_fit([1.0, 2.0]), CovarianceEstimate(np.diag([1.0, 0.0]), 1.0, Kernel.uniform, 0.5))


def test_location_scale_recovery():
    taus = (0.1, 0.5, 0.9)
    hits = 0
    for seed in range(100):
        frame, truth = simulate_location_scale(LocationScaleParams(seed=seed))
        design = DesignMatrix.from_arrays(frame['y'].values, frame['x1'].values)
        hits += all(
            np.all(np.abs(qr_solver.fit(design, tau).beta - truth.coefficients(tau)) <= 0.1) for tau in taus
        )
    assert hits >= 95


def test_powell_coverage():
    covered = 0
    reps = 300
    for seed in range(reps):
        frame, truth = simulate_location_scale(LocationScaleParams(g=(0.5, 0.0), T=1000, seed=seed))
        design = DesignMatrix.from_arrays(frame['y'].values, frame['x1'].values)
        _, _, table = _estimate(design, 0.5)
        row = table.row('x1')
        covered += row['ci_low'] <= truth.coefficients(0.5)[1] <= row['ci_high']
    assert 0.88 * reps <= covered <= 0.99 * reps


@mark.parametrize('kernel', list(Kernel))
def test_standard_errors_ignore_row_order(kernel):
    frame, _ = simulate_location_scale(LocationScaleParams(b=(1, 2, -1), g=(0.5, 0.1, 0.2), T=200, seed=8))
    y = frame['y'].values
    x = np.column_stack((frame['x1'].values, frame['x2'].values))
    order = np.random.default_rng(8).permutation(len(y))
    _, _, table = _estimate(DesignMatrix.from_arrays(y, x), 0.75, kernel)
    _, _, shuffled = _estimate(DesignMatrix.from_arrays(y[order], x[order]), 0.75, kernel)
    for name in table.column_names:
        assert shuffled.row(name)['estimate'] == approx(table.row(name)['estimate'], rel=1e-8, abs=1e-10)
        assert shuffled.row(name)['std_error'] == approx(table.row(name)['std_error'], rel=1e-6)
