"""
Asymptotic inference for quantile regression coefficients: the Powell kernel sandwich covariance, bandwidth rules,
and Wald tables.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from logging import getLogger
from typing import Any, Dict, List, Tuple

import numpy as np
from scipy.stats import norm

from tailflation.exceptions import BandwidthError, CovarianceError, SingularHessianError
from tailflation.qr_solver import QrFit, QuantileLevel
from tailflation.timeseries import DesignMatrix

logger = getLogger(__name__)

__all__ = ['Kernel', 'BandwidthRule', 'CovarianceEstimate', 'CoefficientTable', 'CAUTION_NOTE',
           'hall_sheather_bandwidth', 'bofinger_bandwidth', 'bandwidth', 'residual_bandwidth', 'powell_covariance',
           'coefficient_table']

CAUTION_NOTE = ('Standard errors, tests and intervals rely on the asymptotic normality of the quantile regression '
                'estimator and should be taken with caution in small samples and at extreme quantiles.')

MAX_CONDITION = 1e12
IQR_TO_SD = 1.34


class Kernel(str, Enum):
    uniform = 'uniform'
    gaussian = 'gaussian'

    def __call__(self, u: np.ndarray) -> np.ndarray:
        if self is Kernel.uniform:
            return 0.5 * (np.abs(u) <= 1.0)
        return norm.pdf(u)


class BandwidthRule(str, Enum):
    hall_sheather = 'hall_sheather'
    bofinger = 'bofinger'


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    matrix: np.ndarray
    bandwidth: float
    """
    The bandwidth on the residual scale
    """
    kernel: Kernel
    tau: float


def _clip(h: float, n: int, tau: float) -> float:
    edge = min(tau, 1 - tau)
    if n * edge < 0.5:
        raise BandwidthError(f'no admissible bandwidth at tau={tau:g} with n={n}, a larger sample is needed '
                             f'(n * min(tau, 1 - tau) must be at least 0.5)')
    if h >= edge:
        clipped = 0.9 * edge
        logger.warning('bandwidth clipped to keep tau +- h inside (0, 1)',
                       extra={'tau': tau, 'n': n, 'bandwidth': h, 'clipped': clipped})
        return clipped
    return h


def _check_rows(n: int, p: int) -> None:
    if n < p + 2:
        raise BandwidthError(f'bandwidth selection needs n >= p + 2, got n={n}, p={p}')


def hall_sheather_bandwidth(n: int, tau: float, alpha: float = 0.05, p: int = 1) -> float:
    """
    The Hall-Sheather bandwidth on the quantile scale,
    z^(2/3) * (1.5 phi(q)^2 / (2 q^2 + 1))^(1/3) * n^(-1/3), with q = Phi^-1(tau) and z the 1 - alpha/2 normal
    quantile.

    Args:
        n: the number of observations.
        tau: the quantile level.
        alpha: the level of the intervals the bandwidth is tuned for.
        p: the number of coefficients of the model.

    Returns:
        The bandwidth, clipped so that tau +- h stays in (0, 1).

    Raises:
        BandwidthError if no admissible bandwidth exists.
    """
    tau = QuantileLevel(tau)
    _check_rows(n, p)
    if not 0 < alpha < 1:
        raise ValueError(f'alpha must be in (0, 1), got {alpha}')
    q = norm.ppf(tau)
    z = norm.ppf(1 - alpha / 2)
    h = z ** (2 / 3) * (1.5 * norm.pdf(q) ** 2 / (2 * q ** 2 + 1)) ** (1 / 3) * n ** (-1 / 3)
    return _clip(float(h), n, float(tau))


def bofinger_bandwidth(n: int, tau: float, p: int = 1) -> float:
    """
    The Bofinger bandwidth on the quantile scale, n^(-1/5) * (4.5 phi(q)^4 / (2 q^2 + 1)^2)^(1/5)
    """
    tau = QuantileLevel(tau)
    _check_rows(n, p)
    q = norm.ppf(tau)
    h = n ** (-1 / 5) * (4.5 * norm.pdf(q) ** 4 / (2 * q ** 2 + 1) ** 2) ** (1 / 5)
    return _clip(float(h), n, float(tau))


def bandwidth(rule: BandwidthRule, n: int, tau: float, alpha: float = 0.05, p: int = 1) -> float:
    if rule == BandwidthRule.hall_sheather:
        return hall_sheather_bandwidth(n, tau, alpha, p)
    return bofinger_bandwidth(n, tau, p)


def residual_bandwidth(fit: QrFit, h: float) -> float:
    """
    Convert a quantile scale bandwidth to the residual scale,
    kappa * (Phi^-1(tau + h) - Phi^-1(tau - h)) with kappa = min(sd, iqr / 1.34) of the residuals
    """
    tau = float(fit.tau)
    if not (0 < tau - h and tau + h < 1):
        raise BandwidthError(f'bandwidth {h:g} is not admissible at tau={tau:g}')
    r = fit.residuals
    q75, q25 = np.quantile(r, [0.75, 0.25])
    kappa = min(float(np.std(r, ddof=1)), float(q75 - q25) / IQR_TO_SD)
    if not kappa > 0:
        # more than half the residuals coincide, fall back to the spread
        kappa = float(np.std(r, ddof=1))
    if not kappa > 0:
        raise BandwidthError(f'residuals at tau={tau:g} have no spread, the density at 0 cannot be estimated')
    return kappa * float(norm.ppf(tau + h) - norm.ppf(tau - h))


def powell_covariance(design: DesignMatrix, fit: QrFit, h: float, kernel: Kernel = Kernel.uniform) \
        -> CovarianceEstimate:
    """
    Estimate the asymptotic covariance of the coefficients with Powell's kernel sandwich,
    tau (1 - tau) / n * H^-1 J H^-1, J = X'X / n and H = sum K(r_i / h) x_i x_i' / (n h).

    Args:
        design: the design the fit was computed on.
        fit: the fit.
        h: the bandwidth on the residual scale.
        kernel: the kernel weighting residuals.

    Raises:
        SingularHessianError if the kernel weighted matrix H is numerically singular, typically when h is too small
         for any residual to fall in the kernel window.
    """
    if not h > 0:
        raise ValueError(f'bandwidth must be positive, got {h}')
    x = design.x
    n = design.n
    if x.shape[1] != len(fit.beta) or n != len(fit.residuals):
        raise ValueError('fit does not match the design')
    tau = float(fit.tau)
    weights = kernel(fit.residuals / h)
    j = x.T @ x / n
    hessian = (x.T * weights) @ x / (n * h)
    condition = np.linalg.cond(hessian)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise SingularHessianError(f'kernel weighted design is singular at tau={tau:g} (condition {condition:.3g}) '
                                   f'with bandwidth {h:.4g}, consider a larger bandwidth')
    bread = np.linalg.inv(hessian)
    matrix = tau * (1 - tau) / n * bread @ j @ bread
    matrix = (matrix + matrix.T) / 2
    matrix.flags.writeable = False
    return CovarianceEstimate(matrix, float(h), kernel, tau)


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    tau: float
    alpha: float
    column_names: Tuple[str, ...]
    estimate: np.ndarray
    std_error: np.ndarray
    z: np.ndarray
    p_value: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    note: str = CAUTION_NOTE

    def __len__(self):
        return len(self.column_names)

    def row(self, name: str) -> Dict[str, Any]:
        i = self.column_names.index(name)
        return {
            'covariate': name,
            'estimate': float(self.estimate[i]),
            'std_error': float(self.std_error[i]),
            'z': float(self.z[i]),
            'p_value': float(self.p_value[i]),
            'ci_low': float(self.ci_low[i]),
            'ci_high': float(self.ci_high[i]),
        }

    def rows(self) -> List[Dict[str, Any]]:
        return [self.row(name) for name in self.column_names]


def coefficient_table(fit: QrFit, cov: CovarianceEstimate, alpha: float = 0.05) -> CoefficientTable:
    """
    Wald statistics, two sided normal p-values and 1 - alpha confidence intervals per coefficient.

    Raises:
        CovarianceError if a variance is not positive
    """
    if not 0 < alpha < 1:
        raise ValueError(f'alpha must be in (0, 1), got {alpha}')
    variances = np.diag(cov.matrix)
    if variances.shape != fit.beta.shape:
        raise ValueError(f'covariance of shape {cov.matrix.shape} does not match {len(fit.beta)} coefficients')
    if not (np.all(np.isfinite(variances)) and np.all(variances > 0)):
        bad = [name for name, v in zip(fit.column_names, variances) if not v > 0]
        raise CovarianceError(f'nonpositive variance estimate at tau={float(fit.tau):g} for {bad}')
    se = np.sqrt(variances)
    z = fit.beta / se
    critical = norm.ppf(1 - alpha / 2)
    return CoefficientTable(
        tau=float(fit.tau),
        alpha=alpha,
        column_names=fit.column_names,
        estimate=fit.beta.copy(),
        std_error=se,
        z=z,
        p_value=2 * norm.sf(np.abs(z)),
        ci_low=fit.beta - critical * se,
        ci_high=fit.beta + critical * se,
    )
