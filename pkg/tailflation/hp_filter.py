"""
Hodrick-Prescott trend extraction.

The trend is the minimizer of sum (y - tau)^2 + lambda * sum (second difference of tau)^2, that is the solution of
(I + lambda D'D) tau = y. Rather than factoring I + lambda D'D, whose condition number grows with lambda, we solve
the equivalent system (I / lambda + D D') w = D y for the gap D'w. D D' is the constant pentadiagonal Toeplitz matrix
with bands (1, -4, 6, -4, 1), so the solve is a symmetric banded Cholesky of bandwidth 2, O(T), and stays accurate
for very large lambda.
"""
from __future__ import annotations

from dataclasses import dataclass
from logging import getLogger

import numpy as np
from scipy.linalg import LinAlgError, solveh_banded

from tailflation.exceptions import ConfigurationError, DomainError, NumericalError, SmallSampleError
from tailflation.timeseries import QuarterlySeries

logger = getLogger(__name__)

__all__ = ['DEFAULT_LAMBDA', 'HpResult', 'hp_trend', 'hp_gap']

DEFAULT_LAMBDA = 1600.0
"""
The conventional smoothing parameter for quarterly data
"""

MIN_LENGTH = 4


@dataclass(frozen=True)
class HpResult:
    trend: QuarterlySeries
    gap: QuarterlySeries
    """
    The input minus the trend, per period
    """
    lambda_: float


def _second_difference(values: np.ndarray) -> np.ndarray:
    return values[2:] - 2 * values[1:-1] + values[:-2]


def _second_difference_adjoint(w: np.ndarray) -> np.ndarray:
    ret = np.zeros(len(w) + 2)
    ret[:-2] += w
    ret[1:-1] -= 2 * w
    ret[2:] += w
    return ret


def _dual_bands(m: int, lambda_: float) -> np.ndarray:
    # upper banded storage of I / lambda + D D', see scipy.linalg.solveh_banded
    ab = np.zeros((3, m))
    ab[0, 2:] = 1.0
    ab[1, 1:] = -4.0
    ab[2, :] = 6.0 + 1.0 / lambda_
    return ab


def _hp_gap(y: np.ndarray, lambda_: float) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or len(y) < MIN_LENGTH:
        raise SmallSampleError(f'the HP filter needs at least {MIN_LENGTH} observations, got {y.size}', y.size)
    if not np.all(np.isfinite(y)):
        raise DomainError('the HP filter input must be finite')
    if not (lambda_ > 0 and np.isfinite(lambda_)):
        raise ConfigurationError(f'HP smoothing parameter must be positive, got {lambda_}')
    try:
        w = solveh_banded(_dual_bands(len(y) - 2, lambda_), _second_difference(y), check_finite=False)
    except LinAlgError as e:
        raise NumericalError(f'banded HP solve failed: {e}') from e
    return _second_difference_adjoint(w)


def hp_trend(y: np.ndarray, lambda_: float = DEFAULT_LAMBDA) -> np.ndarray:
    """
    Compute the Hodrick-Prescott trend of a vector.

    Args:
        y: the observations, at least 4 finite values.
        lambda_: the smoothing parameter, positive.

    Returns:
        The trend, of the same length as y
    """
    y = np.asarray(y, dtype=float)
    return y - _hp_gap(y, lambda_)


def hp_gap(log_gdp: QuarterlySeries, lambda_: float = DEFAULT_LAMBDA) -> HpResult:
    """
    Split a (log) output series into its HP trend and the gap from it.
    """
    gap = _hp_gap(log_gdp.values, lambda_)
    logger.debug('hp filter applied', extra={'start': str(log_gdp.start), 'n': len(log_gdp), 'lambda': lambda_})
    return HpResult(
        trend=QuarterlySeries(log_gdp.start, log_gdp.values - gap),
        gap=QuarterlySeries(log_gdp.start, gap),
        lambda_=lambda_,
    )
