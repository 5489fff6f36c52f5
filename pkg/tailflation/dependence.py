from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from logging import getLogger
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import kendalltau, rankdata

from tailflation.exceptions import EmptySeriesError, SmallSampleError, UndefinedCorrelationError
from tailflation.timeseries import Frame, intersect_spans, lag

logger = getLogger(__name__)

__all__ = ['pearson', 'spearman', 'kendall', 'SubsampleKind', 'SubsampleRule', 'DependenceMeasures',
           'DependenceTable', 'lag_table']

MIN_ROWS = 3


def _pair(x: Any, y: Any, minimum: int) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError(f'expected two vectors of equal length, got {x.shape} and {y.shape}')
    if len(x) < minimum:
        raise SmallSampleError(f'at least {minimum} pairs are needed, got {len(x)}', len(x))
    return x, y


def pearson(x: Any, y: Any) -> float:
    """
    The sample Pearson correlation of two vectors

    Raises:
        UndefinedCorrelationError if either vector is constant
    """
    x, y = _pair(x, y, MIN_ROWS)
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedCorrelationError('correlation is undefined for a constant vector')
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = xc @ xc
    syy = yc @ yc
    if not (sxx > 0 and syy > 0):
        raise UndefinedCorrelationError('correlation is undefined, a vector has no measurable spread')
    return float(np.clip((xc @ yc) / np.sqrt(sxx * syy), -1.0, 1.0))


def spearman(x: Any, y: Any) -> float:
    """
    The Spearman rank correlation, the Pearson correlation of mid-ranks (ties get their average rank)
    """
    x, y = _pair(x, y, MIN_ROWS)
    return pearson(rankdata(x, method='average'), rankdata(y, method='average'))


def kendall(x: Any, y: Any) -> float:
    """
    Kendall's tau-b, (concordant - discordant) / sqrt((n0 - tx) (n0 - ty)) with n0 = n(n-1)/2 and tx, ty the
    number of pairs tied in x and in y. Computed in O(n log n).
    """
    x, y = _pair(x, y, 2)
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedCorrelationError('kendall tau is undefined for an all-tied vector')
    tau = kendalltau(x, y, variant='b')[0]
    return float(np.clip(tau, -1.0, 1.0))


class SubsampleKind(str, Enum):
    deflation = 'deflation'
    above_threshold = 'above_threshold'


@dataclass(frozen=True)
class SubsampleRule:
    """
    A selection of rows based on the value of the response
    """
    kind: SubsampleKind
    threshold: float = 0.0
    """
    Only used by above_threshold rules
    """

    @classmethod
    def deflation(cls) -> SubsampleRule:
        return cls(SubsampleKind.deflation)

    @classmethod
    def above(cls, threshold: float) -> SubsampleRule:
        return cls(SubsampleKind.above_threshold, threshold)

    @property
    def label(self) -> str:
        if self.kind == SubsampleKind.deflation:
            return 'deflation'
        return f'above_{self.threshold:g}'

    def mask(self, response: np.ndarray) -> np.ndarray:
        if self.kind == SubsampleKind.deflation:
            return response < 0
        return response > self.threshold


@dataclass(frozen=True)
class DependenceMeasures:
    pearson: float
    spearman: float
    kendall: float


@dataclass(frozen=True)
class DependenceTable:
    """
    Dependence between a response and the lags of a covariate
    """
    response: str
    covariate: str
    lags: Tuple[int, ...]
    measures: Tuple[DependenceMeasures, ...]
    n_effective: Tuple[int, ...]
    rule: Optional[SubsampleRule] = None

    @property
    def sample(self) -> str:
        return 'full' if self.rule is None else self.rule.label

    def rows(self) -> List[Dict[str, Any]]:
        return [
            {'lag': k, 'n': n, 'pearson': m.pearson, 'spearman': m.spearman, 'kendall': m.kendall}
            for k, n, m in zip(self.lags, self.n_effective, self.measures)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'response': self.response,
            'covariate': self.covariate,
            'sample': self.sample,
            'rows': self.rows(),
        }


def lag_table(frame: Frame, response: str, covariate: str, max_lag: int,
              rule: Optional[SubsampleRule] = None) -> DependenceTable:
    """
    Compute the three dependence measures between a response and each lag of a covariate.

    Args:
        frame: the frame holding both series.
        response: the name of the response series.
        covariate: the name of the covariate series.
        max_lag: the largest lag to tabulate, lags 0..max_lag are computed.
        rule: optional subsample rule, applied on the response after the lag alignment.

    Raises:
        SmallSampleError if fewer than 3 rows remain for any lag
    """
    if max_lag < 0:
        raise ValueError(f'max_lag must be nonnegative, got {max_lag}')
    y_series = frame[response]
    x_series = frame[covariate]
    lags: Sequence[int] = range(max_lag + 1)
    measures = []
    n_effective = []
    for k in lags:
        try:
            lagged = lag(x_series, k)
            first, last = intersect_spans((y_series, lagged))
        except EmptySeriesError as e:
            raise SmallSampleError(f'no rows for {covariate} at lag {k}: {e}', 0) from e
        y = y_series.window(first, last)
        x = lagged.window(first, last)
        if rule is not None:
            keep = rule.mask(y)
            y, x = y[keep], x[keep]
        if len(y) < MIN_ROWS:
            raise SmallSampleError(
                f'only {len(y)} rows for {covariate} at lag {k}' + (f' in the {rule.label} subsample' if rule else ''),
                len(y))
        measures.append(DependenceMeasures(pearson(x, y), spearman(x, y), kendall(x, y)))
        n_effective.append(len(y))
    logger.debug('dependence table computed', extra={'response': response, 'covariate': covariate,
                                                     'sample': 'full' if rule is None else rule.label})
    return DependenceTable(response, covariate, tuple(lags), tuple(measures), tuple(n_effective), rule)
