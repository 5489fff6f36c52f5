from __future__ import annotations

from logging import getLogger
from os import PathLike
from typing import List, Union

import numpy as np
import pandas as pd

from tailflation.exceptions import IngestError
from tailflation.timeseries import Frame, Period, QuarterlySeries

logger = getLogger(__name__)

__all__ = ['PERIOD_COLUMN', 'read_frame', 'write_frame']

PERIOD_COLUMN = 'period'


def _parse_periods(raw: pd.Series) -> List[Period]:
    periods = []
    for row, text in enumerate(raw):
        try:
            periods.append(Period.parse(str(text)))
        except ValueError as e:
            raise IngestError(f'row {row + 1}: {e}') from e
    for previous, current in zip(periods, periods[1:]):
        if current.quarters_since(previous) != 1:
            raise IngestError(f'periods must be consecutive quarters, found {previous} followed by {current}')
    return periods


def _parse_values(name: str, raw: pd.Series) -> np.ndarray:
    values = np.empty(len(raw))
    for row, cell in enumerate(raw):
        if not isinstance(cell, str):
            # an empty cell
            values[row] = np.nan
            continue
        try:
            values[row] = float(cell)
        except ValueError:
            raise IngestError(f'column {name!r}, row {row + 1}: {cell!r} is not a number') from None
        if np.isinf(values[row]):
            raise IngestError(f'column {name!r}, row {row + 1}: infinite values are not allowed')
    return values


def read_frame(path: Union[str, PathLike], strict: bool = True) -> Frame:
    """
    Read a quarterly CSV file into a frame.

    Args:
        path: The CSV path. The header holds column names, the first column must be `period` formatted YYYYQn, and
         every other column is parsed as real numbers with `.` as decimal point.
        strict: If true, any missing cell is an error. Otherwise, leading and trailing missing cells of a column
         are trimmed, so columns may cover different spans. Interior gaps are always an error, values are never
         imputed.

    Returns:
        A frame with one series per non-period column, in file order
    """
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, na_values=[''], skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IngestError(f'could not read {path}: {e}') from e
    if raw.columns.empty or raw.columns[0] != PERIOD_COLUMN:
        raise IngestError(f'the first column of {path} must be {PERIOD_COLUMN!r}, got {list(raw.columns)[:1]}')
    if len(raw) == 0:
        raise IngestError(f'{path} has no data rows')
    if raw[PERIOD_COLUMN].isna().any():
        raise IngestError(f'{path} has rows without a period')
    periods = _parse_periods(raw[PERIOD_COLUMN])

    series = []
    for name in raw.columns[1:]:
        values = _parse_values(name, raw[name])
        missing = np.isnan(values)
        if missing.any():
            if strict:
                first_missing = periods[int(np.flatnonzero(missing)[0])]
                raise IngestError(f'column {name!r} has a missing value at {first_missing}')
            present = np.flatnonzero(~missing)
            if len(present) == 0:
                raise IngestError(f'column {name!r} has no values')
            lo, hi = int(present[0]), int(present[-1])
            if missing[lo:hi + 1].any():
                gap = periods[lo + int(np.flatnonzero(missing[lo:hi + 1])[0])]
                raise IngestError(f'column {name!r} has an interior missing value at {gap}')
            logger.info('column trimmed to observed span', extra={'column': name, 'first': str(periods[lo]),
                                                                  'last': str(periods[hi])})
            series.append((name, QuarterlySeries(periods[lo], values[lo:hi + 1])))
        else:
            series.append((name, QuarterlySeries(periods[0], values)))
    logger.debug('frame read', extra={'path': str(path), 'columns': [n for n, _ in series], 'rows': len(periods)})
    return Frame(series)


def write_frame(frame: Frame, path: Union[str, PathLike]) -> None:
    """
    Write a frame to CSV in the format read by read_frame. Series with shorter spans are padded with empty cells.
    """
    if not len(frame):
        raise IngestError('cannot write an empty frame')
    first = min(s.start for s in frame.values())
    last = max(s.end for s in frame.values())
    n = last.quarters_since(first) + 1
    data = {PERIOD_COLUMN: [str(first.shift(i)) for i in range(n)]}
    for name, s in frame.items():
        column = np.full(n, np.nan)
        offset = s.start.quarters_since(first)
        column[offset:offset + len(s)] = s.values
        data[name] = column
    pd.DataFrame(data).to_csv(path, index=False, lineterminator='\n')
