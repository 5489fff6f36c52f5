from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from logging import getLogger
from math import log
from typing import Iterable, Iterator, List, Optional, Tuple, Union

from ordered_set import OrderedSet

from tailflation import qr_solver
from tailflation.exceptions import (
    ConfigurationError, DataError, InsufficientDataError, NumericalError, PerfectFitError, SelectionError
)
from tailflation.qr_solver import QrFit, QuantileLevel
from tailflation.timeseries import DesignMatrix, Frame, assemble, column_name

logger = getLogger(__name__)

__all__ = ['MAX_POOL_SIZE', 'CandidatePool', 'AuditEntry', 'SelectionResult', 'qr_aic', 'best_subset']

MAX_POOL_SIZE = 20
"""
The largest pool for which every subset is enumerated
"""


@dataclass(frozen=True)
class CandidatePool:
    """
    The covariates a quantile model may choose from, as (series name, lag) pairs. The intercept is always included
    and is not part of the pool.
    """
    entries: Tuple[Tuple[str, int], ...]
    max_size: Optional[int] = None
    """
    The largest number of pool entries in a single subset, all of them if None
    """

    def __post_init__(self):
        entries = tuple((str(name), int(lag)) for name, lag in self.entries)
        if not entries:
            raise ConfigurationError('the candidate pool is empty')
        if len(OrderedSet(entries)) != len(entries):
            raise ConfigurationError(f'candidate pool entries must be unique, got {list(entries)}')
        if len(entries) > MAX_POOL_SIZE:
            raise ConfigurationError(f'candidate pool has {len(entries)} entries, at most {MAX_POOL_SIZE} '
                                     f'can be enumerated')
        negative = [e for e in entries if e[1] < 0]
        if negative:
            raise ConfigurationError(f'candidate lags must be nonnegative, got {negative}')
        if self.max_size is not None and self.max_size < 1:
            raise ConfigurationError(f'max subset size must be positive, got {self.max_size}')
        object.__setattr__(self, 'entries', entries)

    @classmethod
    def of(cls, *entries: Union[str, Tuple[str, int]], max_size: Optional[int] = None) -> CandidatePool:
        """
        Build a pool, bare names stand for lag 0
        """
        return cls(tuple((e, 0) if isinstance(e, str) else e for e in entries), max_size)

    def __len__(self):
        return len(self.entries)

    def __iter__(self) -> Iterator[Tuple[str, int]]:
        return iter(self.entries)

    @property
    def column_names(self) -> Tuple[str, ...]:
        return tuple(column_name(name, k) for name, k in self.entries)

    @property
    def effective_max_size(self) -> int:
        return len(self) if self.max_size is None else min(self.max_size, len(self))

    def subsets(self) -> Iterator[Tuple[int, Tuple[str, ...]]]:
        """
        Every nonempty subset of column names up to the maximum size, keyed by its bitmask over the pool order
        """
        names = self.column_names
        limit = self.effective_max_size
        for mask in range(1, 2 ** len(names)):
            chosen = tuple(name for i, name in enumerate(names) if mask >> i & 1)
            if len(chosen) <= limit:
                yield mask, chosen


@dataclass(frozen=True)
class AuditEntry:
    subset: Tuple[str, ...]
    k: int
    aic: Optional[float]
    """
    None if the subset failed to fit
    """
    error: Optional[str] = None


@dataclass(frozen=True, eq=False)
class SelectionResult:
    tau: QuantileLevel
    subset: Tuple[str, ...]
    """
    The chosen pool columns, excluding the intercept
    """
    fit: QrFit
    aic: float
    design: DesignMatrix
    """
    The design of the chosen model, over the common rows of the whole pool
    """
    audit: Optional[Tuple[AuditEntry, ...]] = None
    failures: Tuple[AuditEntry, ...] = field(default=())

    @property
    def n(self) -> int:
        return self.design.n


def qr_aic(fit: QrFit) -> float:
    """
    The asymmetric-Laplace quasi-likelihood AIC of a fit, 2k + 2n ln(objective / n)

    Raises:
        PerfectFitError if the fit has zero loss
    """
    if not fit.objective > 0:
        raise PerfectFitError(f'fit at tau={float(fit.tau):g} has zero loss, the model interpolates the sample')
    return 2 * fit.p + 2 * fit.n * log(fit.objective / fit.n)


def _selection_key(entry: AuditEntry) -> Tuple[float, int, Tuple[str, ...]]:
    assert entry.aic is not None
    return entry.aic, entry.k, tuple(sorted(entry.subset))


def best_subset(frame: Frame, response: str, pool: CandidatePool, tau: float, *, audit: bool = False,
                workers: int = 1) -> SelectionResult:
    """
    Choose the subset of the pool minimizing the AIC of the quantile regression at tau.

    Every candidate is fit on the same rows: those where the response and every lagged pool column are observed.

    Args:
        frame: the frame holding the response and every series of the pool.
        response: the name of the response series.
        pool: the candidate pool.
        tau: the quantile level.
        audit: whether to keep the AIC of every subset on the result.
        workers: the number of threads fitting subsets concurrently.

    Returns:
        The subset with the lowest AIC, ties broken by fewer coefficients and then by the sorted column names.

    Raises:
        InsufficientDataError if the common rows cannot support the largest subset, SelectionError if every subset
         failed to fit.
    """
    tau = QuantileLevel(tau)
    full = assemble(frame, response, pool.entries)
    largest = pool.effective_max_size
    if full.n <= largest + 1:
        raise InsufficientDataError(f'{full.n} common rows cannot support subsets of {largest} covariates and an '
                                    f'intercept')

    def evaluate(subset: Tuple[str, ...]) -> Tuple[AuditEntry, Optional[QrFit]]:
        k = len(subset) + int(full.intercept)
        try:
            fit = qr_solver.fit(full.select(subset), tau)
            aic = qr_aic(fit)
        except (NumericalError, DataError) as e:
            logger.warning('subset fit failed', extra={'tau': float(tau), 'subset': subset, 'error': str(e)})
            return AuditEntry(subset, k, None, str(e)), None
        return AuditEntry(subset, k, aic), fit

    subsets: List[Tuple[str, ...]] = [s for _, s in pool.subsets()]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            outcomes: Iterable = list(executor.map(evaluate, subsets))
    else:
        outcomes = [evaluate(s) for s in subsets]

    best: Optional[Tuple[AuditEntry, QrFit]] = None
    entries = []
    failures = []
    for entry, fit in outcomes:
        entries.append(entry)
        if fit is None:
            failures.append(entry)
            continue
        if best is None or _selection_key(entry) < _selection_key(best[0]):
            best = (entry, fit)
    if best is None:
        raise SelectionError(f'all {len(subsets)} candidate subsets failed to fit at tau={float(tau):g}')
    entry, fit = best
    logger.debug('subset selected', extra={'tau': float(tau), 'subset': entry.subset, 'aic': entry.aic,
                                           'n': full.n, 'candidates': len(subsets)})
    return SelectionResult(
        tau=tau,
        subset=entry.subset,
        fit=fit,
        aic=entry.aic,  # type: ignore[arg-type]
        design=full.select(entry.subset),
        audit=tuple(entries) if audit else None,
        failures=tuple(failures),
    )
