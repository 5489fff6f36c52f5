"""
Linear quantile regression by exact minimization of the pinball loss.

The fit solves the dual of the quantile regression linear program,

    maximize y'a  subject to  X'a = (1 - tau) X'1,  0 <= a <= 1,

with HiGHS. The multipliers of the equality constraints approximate the coefficients. They are then recomputed
exactly from p interpolated rows, taking first the rows whose dual value lies strictly inside (0, 1), since every
optimal solution interpolates those. The dual solution shifted by 1 - tau is the subgradient certificate of
optimality and is kept on the fit. A solution that fails the certificate is not returned: the next backend of
SOLVER_ATTEMPTS is tried instead.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from logging import getLogger
from typing import Any, Dict, FrozenSet, Iterator, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, qr, solve
from scipy.optimize import linprog

from tailflation.exceptions import InsufficientDataError, SingularDesignError, SolverError
from tailflation.timeseries import DesignMatrix

logger = getLogger(__name__)

__all__ = ['QuantileLevel', 'QrFit', 'Certificate', 'pinball', 'check_loss', 'fit', 'check_optimality']

RANK_TOLERANCE = 1e-10
"""
Relative tolerance on the pivoted QR diagonal under which a design is considered rank deficient
"""
ZERO_RESIDUAL_TOLERANCE = 1e-9
"""
Residuals smaller than this (relative to the scale of the response) are treated as exact interpolation
"""
BASIS_TOLERANCE = 1e-8
"""
Relative norm a row must keep after projection on the rows already chosen to enter a basis
"""
DUAL_INTERIOR_TOLERANCE = 1e-9
CERTIFICATE_TOLERANCE = 1e-8
SOLVER_ATTEMPTS: Tuple[Tuple[str, Dict[str, Any]], ...] = (
    ('highs-ds', {}),
    ('highs-ds', {'presolve': False}),
    ('highs-ipm', {}),
    ('highs', {'presolve': False}),
)
"""
The linear programming backends tried in order, until one returns a certified solution
"""


class QuantileLevel(float):
    """
    A quantile level, a float in the open interval (0, 1)
    """

    def __new__(cls, tau: Any):
        value = float(tau)
        if not 0.0 < value < 1.0:
            raise ValueError(f'quantile level must be in (0, 1), got {tau}')
        return super().__new__(cls, value)


def pinball(u: float, tau: float) -> float:
    """
    The pinball (check) loss, (tau - 1{u < 0}) * u
    """
    tau = QuantileLevel(tau)
    return float((tau - (u < 0)) * u)


def check_loss(residuals: Any, tau: float) -> float:
    """
    The summed pinball loss of a residual vector
    """
    r = np.asarray(residuals, dtype=float)
    return float(np.sum(r * (tau - (r < 0))))


@dataclass(frozen=True, eq=False)
class QrFit:
    tau: QuantileLevel
    beta: np.ndarray
    """
    The coefficients, in the order of the design columns
    """
    residuals: np.ndarray
    """
    y - X beta, with interpolated observations set to exactly 0
    """
    objective: float
    n: int
    p: int
    basic_indices: FrozenSet[int]
    """
    The rows with zero residual
    """
    column_names: Tuple[str, ...] = ()
    dual: Optional[np.ndarray] = field(default=None, repr=False)
    """
    The dual solution v, v_i in [tau - 1, tau] and X'v = 0, if the fit came from the solver
    """

    def coefficient(self, name: str) -> float:
        return float(self.beta[self.column_names.index(name)])

    def predict(self, x: Any) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.beta


@dataclass(frozen=True, eq=False)
class Certificate:
    """
    The outcome of an optimality check
    """
    optimal: bool
    violation: float
    """
    max |X'v| / n over the best admissible subgradient v
    """
    v: np.ndarray

    def __bool__(self):
        return self.optimal


def _zero_tolerance(y: np.ndarray) -> float:
    return ZERO_RESIDUAL_TOLERANCE * max(1.0, float(np.max(np.abs(y))))


def _check_rank(x: np.ndarray, names: Sequence[str]) -> None:
    _, r, pivots = qr(x, mode='economic', pivoting=True)
    diagonal = np.abs(np.diag(r))
    if diagonal.size == 0 or diagonal[0] == 0:
        raise SingularDesignError('design has no nonzero column', list(names))
    rank = int(np.sum(diagonal > RANK_TOLERANCE * diagonal[0]))
    if rank < x.shape[1]:
        dependent = [names[i] for i in pivots[rank:]] if names else [str(i) for i in pivots[rank:]]
        raise SingularDesignError(f'design is rank deficient (rank {rank} of {x.shape[1]}), '
                                  f'dependent columns: {dependent}', dependent)


def _independent_rows(x: np.ndarray, order: np.ndarray) -> Optional[np.ndarray]:
    """
    Greedily pick, in the given order, the first p rows of x that are linearly independent
    """
    p = x.shape[1]
    q = np.zeros((p, p))
    chosen = []
    for i in order:
        row = x[i]
        norm = np.linalg.norm(row)
        if norm == 0:
            continue
        v = row.copy()
        k = len(chosen)
        for _ in range(2):
            v -= q[:k].T @ (q[:k] @ v)
        remaining = np.linalg.norm(v)
        if remaining > BASIS_TOLERANCE * norm:
            q[k] = v / remaining
            chosen.append(int(i))
            if len(chosen) == p:
                return np.array(chosen)
    return None


def _basis_orders(y: np.ndarray, x: np.ndarray, a: np.ndarray, beta: np.ndarray) -> Iterator[np.ndarray]:
    residuals = np.abs(y - x @ beta)
    # rows strictly inside the dual bounds are interpolated by every optimal solution
    interior = (a > DUAL_INTERIOR_TOLERANCE) & (a < 1 - DUAL_INTERIOR_TOLERANCE)
    yield np.lexsort((residuals, ~interior))
    yield np.argsort(residuals, kind='stable')


def _polish(x: np.ndarray, y: np.ndarray, a: np.ndarray, beta: np.ndarray, tau: float) -> np.ndarray:
    """
    Re-solve the coefficients exactly from p interpolated rows of a basic solution, keeping the candidate with the
    smallest loss
    """
    candidates = []
    for order in _basis_orders(y, x, a, beta):
        basis = _independent_rows(x, order)
        if basis is None:
            continue
        try:
            candidates.append(solve(x[basis], y[basis]))
        except LinAlgError:
            continue
    candidates.append(beta)
    return min(candidates, key=lambda b: check_loss(y - x @ b, tau))


def _fit_from_dual(design: DesignMatrix, tau: QuantileLevel, a: np.ndarray, marginals: np.ndarray) -> QrFit:
    x, y = design.x, design.y
    n, p = x.shape
    beta = _polish(x, y, a, -marginals, tau)
    residuals = y - x @ beta
    zero = np.abs(residuals) <= _zero_tolerance(y)
    residuals[zero] = 0.0
    residuals.flags.writeable = False
    return QrFit(
        tau=tau,
        beta=beta,
        residuals=residuals,
        objective=check_loss(residuals, tau),
        n=n,
        p=p,
        basic_indices=frozenset(int(i) for i in np.flatnonzero(zero)),
        column_names=design.column_names,
        dual=a - (1 - tau),
    )


def fit(design: DesignMatrix, tau: float) -> QrFit:
    """
    Fit a linear quantile regression.

    Args:
        design: the design, rows are observations.
        tau: the quantile level.

    Returns:
        A basic solution attaining the global minimum of the summed pinball loss. When the minimizer is not unique,
         any optimal basic solution may be returned.

    Raises:
        InsufficientDataError if n <= p, SingularDesignError if the design is rank deficient, SolverError if no
         backend returns a solution passing the optimality check.
    """
    tau = QuantileLevel(tau)
    x, y = design.x, design.y
    n, p = x.shape
    if n <= p:
        raise InsufficientDataError(f'quantile regression needs more rows than columns, got n={n}, p={p}')
    _check_rank(x, design.column_names)

    failures = []
    for method, options in SOLVER_ATTEMPTS:
        result = linprog(-y, A_eq=x.T, b_eq=(1 - tau) * x.sum(axis=0), bounds=(0, 1), method=method,
                         options=options)
        eqlin = getattr(result, 'eqlin', None)
        if result.status != 0 or result.x is None or eqlin is None:
            failures.append(f'{method}: {result.message}')
            logger.info('linear program failed, retrying', extra={'tau': float(tau), 'method': method,
                                                                  'options': options, 'status': result.status})
            continue
        fitted = _fit_from_dual(design, tau, np.asarray(result.x, dtype=float),
                                np.asarray(eqlin.marginals, dtype=float))
        certificate = check_optimality(x, y, fitted, CERTIFICATE_TOLERANCE)
        if certificate.optimal:
            logger.debug('quantile regression fitted', extra={'tau': float(tau), 'n': n, 'p': p,
                                                             'objective': fitted.objective, 'method': method})
            return fitted
        failures.append(f'{method}: uncertified solution, violation {certificate.violation:.3g}')
        logger.info('linear program solution uncertified, retrying',
                    extra={'tau': float(tau), 'method': method, 'violation': certificate.violation})
    raise SolverError(f'linear program failed at tau={tau}: ' + '; '.join(failures))


def check_optimality(x: Any, y: Any, fit_: QrFit, tol: float = CERTIFICATE_TOLERANCE) -> Certificate:
    """
    Verify the subgradient optimality condition of a fit: there must exist v with v_i = tau for positive residuals,
    v_i = tau - 1 for negative residuals and v_i in [tau - 1, tau] for zero residuals, such that X'v = 0.

    Args:
        x: the regressor matrix the fit was computed on.
        y: the response vector.
        fit_: the fit to verify, residuals are recomputed from its coefficients.
        tol: the largest acceptable violation, max |X'v| / n.

    Returns:
        A certificate with the best v found. Never raises on non-optimal fits.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    tau = float(fit_.tau)
    residuals = y - x @ fit_.beta
    zero_tol = _zero_tolerance(y)
    positive = residuals > zero_tol
    negative = residuals < -zero_tol
    zero = ~(positive | negative)

    v = np.where(positive, tau, tau - 1.0)
    if fit_.dual is not None and fit_.dual.shape == (n,):
        v[zero] = np.clip(fit_.dual[zero], tau - 1.0, tau)
        violation = float(np.max(np.abs(x.T @ v))) / n
        if violation <= tol:
            return Certificate(True, violation, v)

    fixed = x[~zero].T @ v[~zero]
    m = int(zero.sum())
    if m == 0:
        v[zero] = 0.0
        violation = float(np.max(np.abs(fixed))) / n
        return Certificate(violation <= tol, violation, v)
    # minimize t subject to |X_z'v_z + fixed| <= t, v_z in [tau - 1, tau]
    xz = x[zero].T
    k = xz.shape[0]
    ones = np.ones((k, 1))
    a_ub = np.block([[xz, -ones], [-xz, -ones]])
    b_ub = np.concatenate((-fixed, fixed))
    cost = np.zeros(m + 1)
    cost[-1] = 1.0
    bounds = [(tau - 1.0, tau)] * m + [(0, None)]
    result = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method='highs')
    if result.status != 0:
        logger.warning('optimality check failed to solve', extra={'tau': tau, 'message': result.message})
        return Certificate(False, float('inf'), v)
    v[zero] = result.x[:m]
    violation = float(np.max(np.abs(x.T @ v))) / n
    return Certificate(violation <= tol, violation, v)
