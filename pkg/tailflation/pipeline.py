"""
The batch study: ingest, transform, describe, tabulate dependence, then select and make inferences on a quantile
regression model for every requested quantile, and write the reports.
"""
from __future__ import annotations

import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy
from sortedcontainers import SortedDict

from tailflation._version import __version__
from tailflation.config import IMPORTED, ColumnRole, PoolPreset, StudyConfig
from tailflation.dependence import DependenceTable, SubsampleRule, lag_table
from tailflation.exceptions import ConfigurationError, DataError, EmptySeriesError, StageError, TailflationError
from tailflation.hp_filter import HpResult, hp_gap
from tailflation.inference import (
    CAUTION_NOTE, CoefficientTable, CovarianceEstimate, bandwidth, coefficient_table, powell_covariance,
    residual_bandwidth
)
from tailflation.ingest import read_frame
from tailflation.model_selection import CandidatePool, SelectionResult, best_subset
from tailflation.qr_solver import QrFit
from tailflation.synthetic import GENERATOR, lopez_frame
from tailflation.timeseries import (
    INTERCEPT, DesignMatrix, Frame, Period, QuarterlySeries, assemble, difference, log_growth, log_level
)
from tailflation.util import atomic_directory, write_csv, write_json

logger = getLogger(__name__)

__all__ = ['INFLATION_GAP', 'DescriptiveRow', 'DescriptiveTable', 'describe', 'prepare_frame', 'QuantileEntry',
           'CrossingDiagnostic', 'StudyReport', 'infer', 'fit_quantile', 'dependence_tables', 'build_report',
           'write_report', 'run_study', 'emit_plot_data']

INFLATION_GAP = 'inflation_gap'
"""
The derived series of imported minus domestic inflation
"""
DERIVED_SERIES = frozenset({INFLATION_GAP, 'inflation_trailing_mean'})
"""
Series computed from the response, left out of the dependence tables
"""
COEFFICIENT_COLUMNS = ('tau', 'tail', 'covariate', 'estimate', 'std_error', 'z', 'p_value', 'ci_low', 'ci_high')
BAND_COLUMNS = ('tau', 'estimate', 'ci_lo', 'ci_hi')
DEPENDENCE_COLUMNS = ('lag', 'n', 'pearson', 'spearman', 'kendall')
DESCRIPTIVE_COLUMNS = ('series', 'n', 'min', 'q1', 'median', 'mean', 'q3', 'max')
TAILS = ('lower', 'upper')


@dataclass(frozen=True)
class DescriptiveRow:
    series: str
    n: int
    min: float
    q1: float
    median: float
    mean: float
    q3: float
    max: float

    @classmethod
    def of(cls, name: str, values: np.ndarray) -> DescriptiveRow:
        # quartiles follow the inverse of the empirical distribution function, inf{y: F(y) >= tau}
        q1, median, q3 = np.quantile(values, [0.25, 0.5, 0.75], method='inverted_cdf')
        return cls(name, len(values), float(np.min(values)), float(q1), float(median), float(np.mean(values)),
                   float(q3), float(np.max(values)))

    def to_dict(self) -> Dict[str, Any]:
        return {k: getattr(self, k) for k in DESCRIPTIVE_COLUMNS}


@dataclass(frozen=True)
class DescriptiveTable:
    label: str
    rows: Tuple[DescriptiveRow, ...]

    def __getitem__(self, series: str) -> DescriptiveRow:
        for row in self.rows:
            if row.series == series:
                return row
        raise KeyError(series)


def describe(frame: Frame, split: Optional[Period] = None) -> Dict[str, DescriptiveTable]:
    """
    Summary statistics (min, quartiles, mean, max) of every series of a frame.

    Args:
        frame: the frame to describe.
        split: if given, also describe the periods before the split (`pre`) and from the split on (`post`).

    Returns:
        A mapping from `full`, and `pre` and `post` when split, to a table with a row per series.

    Raises:
        EmptySeriesError if the frame is empty or a series has no values on one side of the split
    """
    if not len(frame):
        raise EmptySeriesError('cannot describe an empty frame')
    ret = {'full': DescriptiveTable('full', tuple(DescriptiveRow.of(name, s.values) for name, s in frame.items()))}
    if split is None:
        return ret
    pre, post = [], []
    for name, s in frame.items():
        cut = min(max(split.quarters_since(s.start), 0), len(s))
        if cut == 0 or cut == len(s):
            side = 'before' if cut == 0 else 'from'
            raise EmptySeriesError(f'series {name!r} ({s.start}..{s.end}) has no values {side} the split at {split}')
        pre.append(DescriptiveRow.of(name, s.values[:cut]))
        post.append(DescriptiveRow.of(name, s.values[cut:]))
    ret['pre'] = DescriptiveTable('pre', tuple(pre))
    ret['post'] = DescriptiveTable('post', tuple(post))
    return ret


def prepare_frame(raw: Frame, config: StudyConfig) -> Tuple[Frame, Optional[HpResult]]:
    """
    Turn the input columns into the series of the study, according to their configured roles. Columns without a
    configured role are kept as they are.

    Returns:
        The prepared frame, and the HP decomposition of the output level if one was configured
    """
    specs = {spec.column: spec for spec in config.columns}
    series: List[Tuple[str, QuarterlySeries]] = []
    hp: Optional[HpResult] = None
    for column, s in raw.items():
        spec = specs.get(column)
        if spec is None:
            series.append((column, s))
            continue
        if spec.role in (ColumnRole.price_level, ColumnRole.imported_index):
            series.append((spec.target, log_growth(s)))
        elif spec.role == ColumnRole.gdp_level:
            hp = hp_gap(log_level(s), config.hp_lambda)
            series.append((spec.target, hp.gap))
        else:
            series.append((spec.target, s))
    missing = [column for column in specs if column not in raw]
    if missing:
        raise DataError(f'configured columns {missing} are not in the input, available: {list(raw)}')
    frame = Frame(series)
    if config.pool_preset == PoolPreset.lopez and config.pool is None:
        frame = lopez_frame(frame, config.response, IMPORTED)
    elif config.response in frame and IMPORTED in frame and INFLATION_GAP not in frame:
        frame = frame.with_series(INFLATION_GAP, difference(frame[IMPORTED], frame[config.response]))
    return frame, hp


@dataclass(frozen=True, eq=False)
class QuantileEntry:
    tau: float
    tail: str
    selection: SelectionResult
    bandwidth: float
    """
    The bandwidth on the quantile scale
    """
    covariance: CovarianceEstimate
    table: CoefficientTable


@dataclass(frozen=True)
class CrossingDiagnostic:
    """
    Predicted quantiles at the mean of the common rows, and the adjacent levels where they decrease
    """
    taus: Tuple[float, ...]
    predictions: Tuple[float, ...]
    inversions: Tuple[Tuple[float, float], ...]

    @property
    def count(self) -> int:
        return len(self.inversions)


@dataclass(frozen=True, eq=False)
class StudyReport:
    config: StudyConfig
    frame: Frame
    pool: CandidatePool
    quantiles: Tuple[QuantileEntry, ...]
    """
    One entry per requested quantile level, in increasing order
    """
    descriptive: Dict[str, DescriptiveTable]
    dependence: Tuple[DependenceTable, ...]
    crossings: CrossingDiagnostic
    hp: Optional[HpResult] = None
    skipped_tables: Tuple[str, ...] = ()
    omitted_roles: Tuple[str, ...] = ()
    metadata: Dict[str, Any] = field(default_factory=dict)

    def entry(self, tau: float) -> QuantileEntry:
        for e in self.quantiles:
            if e.tau == tau:
                return e
        raise KeyError(tau)

    def tail(self, tail: str) -> List[QuantileEntry]:
        return [e for e in self.quantiles if e.tail == tail]


def _stage(name: str, func, *args, tau: Optional[float] = None, **kwargs):
    try:
        return func(*args, **kwargs)
    except TailflationError as e:
        raise StageError(name, e, tau) from e


def infer(design: DesignMatrix, fit: QrFit, config: StudyConfig) \
        -> Tuple[float, CovarianceEstimate, CoefficientTable]:
    """
    The configured bandwidth, Powell covariance and coefficient table of a fit

    Returns:
        The bandwidth on the quantile scale, the covariance estimate and the coefficient table
    """
    tau = float(fit.tau)
    h = _stage('bandwidth', bandwidth, config.bandwidth_rule, fit.n, tau, config.alpha, fit.p, tau=tau)
    scale = _stage('bandwidth', residual_bandwidth, fit, h, tau=tau)
    covariance = _stage('covariance', powell_covariance, design, fit, scale, config.kernel, tau=tau)
    table = _stage('inference', coefficient_table, fit, covariance, config.alpha, tau=tau)
    return h, covariance, table


def fit_quantile(frame: Frame, config: StudyConfig, pool: CandidatePool, tau: float, tail: str) -> QuantileEntry:
    """
    Select the model of a quantile level and make inferences on its coefficients
    """
    selection = _stage('selection', best_subset, frame, config.response, pool, tau, audit=config.audit, tau=tau)
    h, covariance, table = infer(selection.design, selection.fit, config)
    logger.debug('quantile done', extra={'tau': tau, 'subset': selection.subset, 'aic': selection.aic})
    return QuantileEntry(tau, tail, selection, h, covariance, table)


def _fit_quantiles(frame: Frame, config: StudyConfig, pool: CandidatePool) -> Tuple[QuantileEntry, ...]:
    results: SortedDict = SortedDict()

    def task(level: Tuple[float, str]) -> QuantileEntry:
        return fit_quantile(frame, config, pool, *level)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            entries = list(executor.map(task, config.quantiles))
    else:
        entries = [task(level) for level in config.quantiles]
    for entry in entries:
        results[entry.tau] = entry
    return tuple(results.values())


def _crossings(frame: Frame, config: StudyConfig, pool: CandidatePool, entries: Sequence[QuantileEntry]) \
        -> CrossingDiagnostic:
    full = assemble(frame, config.response, pool.entries)
    taus = []
    predictions = []
    for entry in entries:
        mean_row = full.select(entry.selection.subset).x.mean(axis=0)
        taus.append(entry.tau)
        predictions.append(float(mean_row @ entry.selection.fit.beta))
    inversions = tuple((taus[i], taus[i + 1]) for i in range(len(taus) - 1) if predictions[i + 1] < predictions[i])
    if inversions:
        logger.warning('quantile crossings found at the mean covariates', extra={'count': len(inversions),
                                                                                 'inversions': inversions})
    return CrossingDiagnostic(tuple(taus), tuple(predictions), inversions)


def dependence_tables(frame: Frame, config: StudyConfig) \
        -> Tuple[Tuple[DependenceTable, ...], Tuple[str, ...]]:
    """
    Lag tables of the response against every other input series, over the full sample and the deflation and
    above-threshold subsamples. Series derived from the response are left out. Subsample tables without enough
    rows are skipped.

    Returns:
        The tables, and the labels (sample/covariate) of the skipped ones
    """
    covariates = [name for name in frame if name != config.response and name not in DERIVED_SERIES]
    tables = []
    skipped = []
    for covariate in covariates:
        tables.append(_stage('dependence', lag_table, frame, config.response, covariate, config.max_lag))
    for rule in (SubsampleRule.deflation(), SubsampleRule.above(config.threshold)):
        for covariate in covariates:
            try:
                tables.append(lag_table(frame, config.response, covariate, config.max_lag, rule))
            except DataError as e:
                logger.warning('subsample dependence table skipped', extra={'covariate': covariate,
                                                                            'sample': rule.label, 'error': str(e)})
                skipped.append(f'{rule.label}/{covariate}')
    return tuple(tables), tuple(skipped)


def _versions() -> Dict[str, str]:
    return {
        'tailflation': __version__,
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'pandas': pd.__version__,
        'python': platform.python_version(),
    }


def build_report(config: StudyConfig, raw: Frame) -> StudyReport:
    """
    Run every stage of the study on an ingested frame, without writing anything.

    Raises:
        StageError naming the failed stage, and the quantile level if the failure is quantile specific
    """
    frame, hp = _stage('transform', prepare_frame, raw, config)
    descriptive = _stage('describe', describe, frame, config.split_period)
    dependence, skipped = dependence_tables(frame, config)
    pool, omitted = _stage('pool', config.candidate_pool, frame)
    entries = _fit_quantiles(frame, config, pool)
    crossings = _stage('crossings', _crossings, frame, config, pool, entries)
    n = entries[0].selection.n
    periods = entries[0].selection.design.periods
    metadata = {
        'versions': _versions(),
        'config': config.canonical(),
        'config_hash': config.config_hash(),
        'seed': config.seed,
        'generator': GENERATOR,
        'kernel': config.kernel.value,
        'bandwidth_rule': config.bandwidth_rule.value,
        'alpha': config.alpha,
        'n': n,
        'span': [str(periods[0]), str(periods[-1])] if periods else None,
        'pool': list(pool.column_names),
        'quantiles': len(entries),
        'crossings': crossings.count,
        'skipped_tables': list(skipped),
        'omitted_roles': list(omitted),
        'note': CAUTION_NOTE,
    }
    logger.info('study complete', extra={'quantiles': len(entries), 'n': n, 'crossings': crossings.count})
    return StudyReport(config, frame, pool, entries, descriptive, dependence, crossings, hp, skipped, omitted,
                       metadata)


def _coefficient_rows(report: StudyReport) -> List[Dict[str, Any]]:
    rows = []
    for entry in report.quantiles:
        for row in entry.table.rows():
            rows.append({'tau': entry.tau, 'tail': entry.tail, **row})
    return rows


def emit_plot_data(report: StudyReport, directory: Union[str, Path]) -> None:
    """
    Write the data behind the coefficient and dependence figures.

    Coefficient bands go to bands/<tail>/<covariate>.csv with the columns (tau, estimate, ci_lo, ci_hi), one row
    per quantile where the covariate was selected. Dependence figures go to dependence/<sample>/<covariate>.csv with
    the columns (lag, n, pearson, spearman, kendall).
    """
    directory = Path(directory)
    covariates = (INTERCEPT, *report.pool.column_names)
    for tail in TAILS:
        entries = report.tail(tail)
        for covariate in covariates:
            rows = []
            for entry in entries:
                if covariate not in entry.table.column_names:
                    continue
                row = entry.table.row(covariate)
                rows.append({'tau': entry.tau, 'estimate': row['estimate'], 'ci_lo': row['ci_low'],
                             'ci_hi': row['ci_high']})
            write_csv(directory / 'bands' / tail / f'{covariate}.csv', rows, BAND_COLUMNS)
    for table in report.dependence:
        write_csv(directory / 'dependence' / table.sample / f'{table.covariate}.csv', table.rows(),
                  DEPENDENCE_COLUMNS)


def _series_rows(frame: Frame) -> List[Dict[str, Any]]:
    # one row per period of the union of spans, cells outside a series' span are left blank
    first = min(s.start for s in frame.values())
    last = max(s.end for s in frame.values())
    rows = []
    for i in range(last.quarters_since(first) + 1):
        period = first.shift(i)
        row: Dict[str, Any] = {'period': str(period)}
        for name, s in frame.items():
            idx = period.quarters_since(s.start)
            row[name] = float(s.values[idx]) if 0 <= idx < len(s) else None
        rows.append(row)
    return rows


def write_report(report: StudyReport, directory: Union[str, Path]) -> None:
    """
    Write every table of a report into a directory
    """
    directory = Path(directory)
    write_csv(directory / 'series.csv', _series_rows(report.frame), ('period', *report.frame))
    coefficient_rows = _coefficient_rows(report)
    write_csv(directory / 'coefficients.csv', coefficient_rows, COEFFICIENT_COLUMNS)
    write_json(directory / 'coefficients.json', {'note': CAUTION_NOTE, 'rows': coefficient_rows})
    write_csv(directory / 'selection.csv', [
        {
            'tau': e.tau, 'tail': e.tail, 'subset': '+'.join(e.selection.subset), 'k': e.selection.fit.p,
            'n': e.selection.n, 'aic': e.selection.aic, 'objective': e.selection.fit.objective,
            'bandwidth': e.bandwidth, 'residual_bandwidth': e.covariance.bandwidth,
        } for e in report.quantiles
    ], ('tau', 'tail', 'subset', 'k', 'n', 'aic', 'objective', 'bandwidth', 'residual_bandwidth'))
    for label, table in report.descriptive.items():
        name = 'descriptive.csv' if label == 'full' else f'descriptive_{label}.csv'
        write_csv(directory / name, [row.to_dict() for row in table.rows], DESCRIPTIVE_COLUMNS)
    crossings = report.crossings
    write_csv(directory / 'crossings.csv', [
        {'tau': tau, 'prediction': prediction, 'crossing': i > 0 and prediction < crossings.predictions[i - 1]}
        for i, (tau, prediction) in enumerate(zip(crossings.taus, crossings.predictions))
    ], ('tau', 'prediction', 'crossing'))
    if report.hp is not None:
        hp = report.hp
        write_csv(directory / 'hpfilter.csv', [
            {'period': str(period), 'trend': trend, 'gap': gap}
            for period, trend, gap in zip(hp.trend.periods(), hp.trend.values, hp.gap.values)
        ], ('period', 'trend', 'gap'))
    if report.config.audit:
        for entry in report.quantiles:
            write_csv(directory / 'audit' / f'{entry.tail}_{entry.tau:g}.csv', [
                {'subset': '+'.join(a.subset), 'k': a.k, 'aic': a.aic, 'error': a.error}
                for a in entry.selection.audit or ()
            ], ('subset', 'k', 'aic', 'error'))
    emit_plot_data(report, directory)
    write_json(directory / 'metadata.json', report.metadata)


def run_study(config: StudyConfig) -> StudyReport:
    """
    Run the full study and write its reports to the configured output directory. The directory is replaced only
    if every stage succeeds.
    """
    if config.output is None:
        raise ConfigurationError('the study needs an output directory')
    raw = _stage('ingest', read_frame, config.input, config.strict)
    report = build_report(config, raw)
    with atomic_directory(config.output) as staging:
        _stage('write', write_report, report, staging)
    logger.info('reports written', extra={'output': str(config.output)})
    return report
