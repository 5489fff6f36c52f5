from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import total_ordering
from logging import getLogger
from types import MappingProxyType
from typing import Any, Iterable, Iterator, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from ordered_set import OrderedSet

from tailflation.exceptions import DomainError, EmptySeriesError, UnknownSeriesError

logger = getLogger(__name__)

__all__ = ['Period', 'QuarterlySeries', 'Frame', 'DesignMatrix', 'INTERCEPT', 'column_name', 'log_growth',
           'log_level', 'lag', 'difference', 'trailing_mean', 'align', 'assemble', 'intersect_spans']

INTERCEPT = 'intercept'
"""
The name of the constant column of a design matrix
"""

_period_pattern = re.compile(r'^\s*(\d{4})\s*[Qq]\s*([1-4])\s*$')


@total_ordering
@dataclass(frozen=True)
class Period:
    """
    A calendar quarter
    """
    year: int
    quarter: int

    def __post_init__(self):
        if self.quarter not in (1, 2, 3, 4):
            raise ValueError(f'quarter must be in 1..4, got {self.quarter}')

    @classmethod
    def parse(cls, text: str) -> Period:
        """
        Args:
            text: a period formatted as YYYYQn, e.g. 2000Q1

        Returns:
            The parsed period
        """
        match = _period_pattern.match(text)
        if not match:
            raise ValueError(f'cannot parse period {text!r}, expected YYYYQn')
        return cls(int(match.group(1)), int(match.group(2)))

    @classmethod
    def from_ordinal(cls, ordinal: int) -> Period:
        year, quarter = divmod(ordinal, 4)
        return cls(year, quarter + 1)

    @property
    def ordinal(self) -> int:
        """
        The number of quarters since year 0, consistent with successor arithmetic
        """
        return self.year * 4 + self.quarter - 1

    def shift(self, quarters: int) -> Period:
        return Period.from_ordinal(self.ordinal + quarters)

    def quarters_since(self, other: Period) -> int:
        return self.ordinal - other.ordinal

    def __lt__(self, other):
        if not isinstance(other, Period):
            return NotImplemented
        return self.ordinal < other.ordinal

    def __str__(self):
        return f'{self.year}Q{self.quarter}'


def _frozen_array(values: Any) -> np.ndarray:
    ret = np.array(values, dtype=float)
    ret.flags.writeable = False
    return ret


@dataclass(frozen=True, eq=False)
class QuarterlySeries:
    """
    A gapless sequence of real values at quarterly frequency, anchored at an explicit start period
    """
    start: Period
    """
    The period of the first value
    """
    values: np.ndarray
    """
    The values, index t belongs to start advanced by t quarters. Read-only.
    """

    def __post_init__(self):
        values = _frozen_array(self.values)
        if values.ndim != 1:
            raise ValueError('series values must be one dimensional')
        if len(values) == 0:
            raise EmptySeriesError(f'series starting at {self.start} has no values')
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise DomainError(f'non-finite value at {self.start.shift(bad)}', self.start.shift(bad))
        object.__setattr__(self, 'values', values)

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, QuarterlySeries):
            return NotImplemented
        return self.start == other.start and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f'QuarterlySeries(start={self.start}, len={len(self)})'

    @property
    def end(self) -> Period:
        """
        The period of the last value
        """
        return self.start.shift(len(self) - 1)

    def periods(self) -> Tuple[Period, ...]:
        return tuple(self.start.shift(i) for i in range(len(self)))

    def index_of(self, period: Period) -> int:
        idx = period.quarters_since(self.start)
        if not 0 <= idx < len(self):
            raise KeyError(f'{period} is outside of the series span {self.start}..{self.end}')
        return idx

    def __getitem__(self, period: Period) -> float:
        return float(self.values[self.index_of(period)])

    def window(self, first: Period, last: Period) -> np.ndarray:
        """
        Args:
            first: the first period of the window (inclusive)
            last: the last period of the window (inclusive)

        Returns:
            The values between first and last, as a read-only view
        """
        return self.values[self.index_of(first):self.index_of(last) + 1]

    def restrict(self, first: Period, last: Period) -> QuarterlySeries:
        return QuarterlySeries(first, self.window(first, last))

    def map(self, func) -> QuarterlySeries:
        return QuarterlySeries(self.start, func(self.values))


class Frame(Mapping[str, QuarterlySeries]):
    """
    An immutable, ordered collection of named quarterly series. The series need not share a span.
    """

    def __init__(self, series: Union[Mapping[str, QuarterlySeries], Iterable[Tuple[str, QuarterlySeries]]] = ()):
        items = list(series.items()) if isinstance(series, Mapping) else list(series)
        names = OrderedSet(name for name, _ in items)
        if len(names) != len(items):
            raise ValueError('series names in a frame must be unique')
        self._series: Mapping[str, QuarterlySeries] = MappingProxyType(dict(items))

    def __getitem__(self, name: str) -> QuarterlySeries:
        try:
            return self._series[name]
        except KeyError:
            raise UnknownSeriesError(f'series {name!r} not found, available: {list(self._series)}') from None

    def __iter__(self) -> Iterator[str]:
        return iter(self._series)

    def __len__(self):
        return len(self._series)

    def __repr__(self):
        return 'Frame(' + ', '.join(f'{k}: {v.start}..{v.end}' for k, v in self._series.items()) + ')'

    def with_series(self, name: str, series: QuarterlySeries) -> Frame:
        """
        Returns:
            A new frame with the series added, or replaced if the name already exists
        """
        items = dict(self._series)
        items[name] = series
        return Frame(items)

    def select(self, names: Iterable[str]) -> Frame:
        return Frame((name, self[name]) for name in names)

    def common_span(self, names: Optional[Iterable[str]] = None) -> Tuple[Period, Period]:
        """
        Args:
            names: the series to intersect, defaults to all series.

        Returns:
            The first and last periods shared by all named series

        Raises:
            EmptySeriesError if the intersection is empty
        """
        chosen = [self[n] for n in (self if names is None else names)]
        if not chosen:
            raise EmptySeriesError('cannot intersect an empty set of series')
        return intersect_spans(chosen)


def intersect_spans(series: Sequence[QuarterlySeries]) -> Tuple[Period, Period]:
    first = max(s.start for s in series)
    last = min(s.end for s in series)
    if last < first:
        raise EmptySeriesError('the series do not share any period')
    return first, last


def column_name(name: str, lag_: int) -> str:
    """
    The design column name of a series at a lag, e.g. gap_L3
    """
    return name if lag_ == 0 else f'{name}_L{lag_}'


def log_level(s: QuarterlySeries) -> QuarterlySeries:
    """
    The natural logarithm of a strictly positive level series

    Raises:
        DomainError naming the first non-positive period
    """
    non_positive = np.flatnonzero(s.values <= 0)
    if len(non_positive):
        period = s.start.shift(int(non_positive[0]))
        raise DomainError(f'non-positive level {s.values[non_positive[0]]} at {period}', period)
    return s.map(np.log)


def log_growth(s: QuarterlySeries) -> QuarterlySeries:
    """
    The quarter-over-quarter log growth rate of a level series, i.e. ln(s[t+1]) - ln(s[t]).

    Returns:
        A series one shorter than s, starting one quarter later.

    Raises:
        DomainError if any level is non-positive, EmptySeriesError if s has a single value.
    """
    logs = log_level(s).values
    if len(logs) < 2:
        raise EmptySeriesError('growth rates need at least two levels')
    return QuarterlySeries(s.start.shift(1), np.diff(logs))


def lag(s: QuarterlySeries, k: int) -> QuarterlySeries:
    """
    Shift a series forward in time, so that the value at period p is the value of s at p - k.
    """
    if k < 0:
        raise ValueError(f'lag must be nonnegative, got {k}')
    if k >= len(s):
        raise EmptySeriesError(f'cannot lag a series of length {len(s)} by {k}')
    if k == 0:
        return s
    return QuarterlySeries(s.start.shift(k), s.values[:len(s) - k])


def difference(a: QuarterlySeries, b: QuarterlySeries) -> QuarterlySeries:
    """
    Elementwise a - b over the common span of both series
    """
    first, last = intersect_spans((a, b))
    return QuarterlySeries(first, a.window(first, last) - b.window(first, last))


def trailing_mean(s: QuarterlySeries, window: int) -> QuarterlySeries:
    """
    The mean of the previous `window` values, excluding the current one. The result at period p averages s over
    p - window .. p - 1.
    """
    if window < 1:
        raise ValueError(f'window must be positive, got {window}')
    if window >= len(s):
        raise EmptySeriesError(f'series of length {len(s)} is too short for a trailing window of {window}')
    means = np.lib.stride_tricks.sliding_window_view(s.values, window)[:-1].mean(axis=1)
    return QuarterlySeries(s.start.shift(window), means)


def align(frame: Frame, names: Iterable[str]) -> Frame:
    """
    Restrict the named series of a frame to their common span
    """
    names = list(names)
    first, last = frame.common_span(names)
    return Frame((name, frame[name].restrict(first, last)) for name in names)


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """
    A response vector paired with a regressor matrix, with the row periods kept for bookkeeping
    """
    response_name: str
    y: np.ndarray
    x: np.ndarray
    column_names: Tuple[str, ...]
    intercept: bool
    """
    Whether the first column is the constant 1, named INTERCEPT
    """
    periods: Tuple[Period, ...] = field(default=())
    """
    The period of each row, empty for designs built from bare arrays
    """

    def __post_init__(self):
        y = _frozen_array(self.y)
        x = _frozen_array(self.x)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise ValueError(f'inconsistent design shapes, y: {y.shape}, x: {x.shape}')
        names = tuple(self.column_names)
        if len(names) != x.shape[1]:
            raise ValueError('column names must match the number of columns')
        if len(OrderedSet(names)) != len(names):
            raise ValueError(f'column names must be unique, got {names}')
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DomainError('design contains non-finite values')
        if self.intercept and (names[0] != INTERCEPT or not np.all(x[:, 0] == 1.0)):
            raise ValueError('the intercept column must come first and be the constant 1')
        if self.periods and len(self.periods) != len(y):
            raise ValueError('periods must match the number of rows')
        object.__setattr__(self, 'y', y)
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'column_names', names)
        object.__setattr__(self, 'periods', tuple(self.periods))

    @classmethod
    def from_arrays(cls, y: Any, x: Any = None, column_names: Optional[Sequence[str]] = None,
                    intercept: bool = True, response_name: str = 'y') -> DesignMatrix:
        """
        Build a design from bare arrays.

        Args:
            y: the response vector.
            x: the regressors, a 2d array without the constant column. None for an intercept-only design.
            column_names: names of the columns of x, defaults to x1, x2, ...
            intercept: whether to prepend a constant column.
            response_name: the name of the response.
        """
        y = np.asarray(y, dtype=float)
        n = len(y)
        x = np.empty((n, 0)) if x is None else np.asarray(x, dtype=float).reshape(n, -1)
        names = list(column_names) if column_names is not None else [f'x{i + 1}' for i in range(x.shape[1])]
        if intercept:
            x = np.column_stack((np.ones(n), x))
            names.insert(0, INTERCEPT)
        return cls(response_name, y, x, tuple(names), intercept)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.x[:, self.column_names.index(name)]
        except ValueError:
            raise UnknownSeriesError(f'column {name!r} not in design {self.column_names}') from None

    def select(self, names: Iterable[str]) -> DesignMatrix:
        """
        Returns:
            A design over the same rows with only the named columns, keeping the intercept if present
        """
        names = [n for n in names if n != INTERCEPT]
        if self.intercept:
            names.insert(0, INTERCEPT)
        indices = []
        for name in names:
            try:
                indices.append(self.column_names.index(name))
            except ValueError:
                raise UnknownSeriesError(f'column {name!r} not in design {self.column_names}') from None
        return DesignMatrix(self.response_name, self.y, self.x[:, indices], tuple(names), self.intercept,
                            self.periods)


def assemble(frame: Frame, response: str, columns: Iterable[Tuple[str, int]], intercept: bool = True) \
        -> DesignMatrix:
    """
    Build a design matrix from a frame.

    Args:
        frame: the frame holding all series.
        response: the name of the response series.
        columns: (series name, lag) pairs, in the order they should appear in the design.
        intercept: whether to include a constant first column.

    Returns:
        A design over every period where the response and all lagged columns are observed.

    Raises:
        UnknownSeriesError for a missing name, EmptySeriesError if no period is shared.
    """
    columns = list(columns)
    y_series = frame[response]
    lagged = [lag(frame[name], k) for name, k in columns]
    first, last = intersect_spans([y_series, *lagged])
    n = last.quarters_since(first) + 1
    names = [column_name(name, k) for name, k in columns]
    x = np.column_stack([s.window(first, last) for s in lagged]) if lagged else np.empty((n, 0))
    if intercept:
        x = np.column_stack((np.ones(n), x))
        names.insert(0, INTERCEPT)
    logger.debug('design assembled', extra={'response': response, 'columns': names, 'first': str(first),
                                            'last': str(last), 'n': n})
    return DesignMatrix(response, y_series.window(first, last), x, tuple(names), intercept,
                        tuple(first.shift(i) for i in range(n)))
