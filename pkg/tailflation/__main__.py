from __future__ import annotations

import logging
import sys
from argparse import ArgumentParser, ArgumentTypeError, Namespace
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import pandas as pd

from tailflation import qr_solver
from tailflation.config import StudyConfig, load_config
from tailflation.dependence import SubsampleRule, lag_table
from tailflation.exceptions import TailflationError
from tailflation.hp_filter import hp_gap
from tailflation.inference import BandwidthRule, Kernel
from tailflation.ingest import read_frame, write_frame
from tailflation.model_selection import best_subset
from tailflation.pipeline import (
    COEFFICIENT_COLUMNS, DEPENDENCE_COLUMNS, DESCRIPTIVE_COLUMNS, dependence_tables, describe, infer, prepare_frame,
    run_study
)
from tailflation.synthetic import (
    LocationScaleParams, NkpcParams, Noise, PcExpParams, simulate_location_scale, simulate_nkpc, simulate_pc_exp
)
from tailflation.timeseries import Frame, assemble, log_level
from tailflation.util import write_json

logger = getLogger('tailflation')

STUDY_FIELDS = ('input', 'output', 'response', 'columns', 'hp_lambda', 'pool', 'pool_preset', 'max_subset_size',
                'lower_grid', 'upper_grid', 'alpha', 'kernel', 'bandwidth_rule', 'split', 'threshold', 'max_lag',
                'seed', 'audit', 'workers', 'strict')


def _column_spec(text: str) -> Dict[str, Any]:
    parts = text.split(':')
    if len(parts) not in (2, 3):
        raise ArgumentTypeError(f'expected COLUMN:ROLE[:NAME], got {text!r}')
    spec: Dict[str, Any] = {'column': parts[0], 'role': parts[1]}
    if len(parts) == 3:
        spec['name'] = parts[2]
    return spec


def _pool_entry(text: str) -> Dict[str, Any]:
    name, _, lag = text.partition(':')
    try:
        return {'name': name, 'lag': int(lag) if lag else 0}
    except ValueError:
        raise ArgumentTypeError(f'expected NAME[:LAG], got {text!r}') from None


def _grid(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise ArgumentTypeError(f'expected comma separated quantile levels, got {text!r}') from None


def _level(text: str) -> float:
    try:
        tau = float(text)
    except ValueError:
        raise ArgumentTypeError(f'expected a quantile level, got {text!r}') from None
    if not 0 < tau < 1:
        raise ArgumentTypeError(f'quantile levels must be in (0, 1), got {tau}')
    return tau


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(',')]
    except ValueError:
        raise ArgumentTypeError(f'expected comma separated numbers, got {text!r}') from None


def _add_study_flags(parser: ArgumentParser) -> None:
    parser.add_argument('--config', type=Path, help='a JSON study configuration, flags take precedence over it')
    parser.add_argument('--input', type=Path, help='the quarterly CSV input')
    parser.add_argument('--response', help='the response series (default: inflation)')
    parser.add_argument('--column', dest='columns', type=_column_spec, action='append',
                        help='an input column and its role, COLUMN:ROLE[:NAME], may be repeated')
    parser.add_argument('--hp-lambda', type=float, help='the HP smoothing parameter (default: 1600)')
    parser.add_argument('--pool-entry', dest='pool', type=_pool_entry, action='append',
                        help='a candidate covariate NAME[:LAG], may be repeated, overrides --pool-preset')
    parser.add_argument('--pool-preset', choices=('broad', 'narrow', 'lopez'))
    parser.add_argument('--max-subset-size', type=int)
    parser.add_argument('--lower-grid', type=_grid, help='comma separated lower tail quantile levels')
    parser.add_argument('--upper-grid', type=_grid, help='comma separated upper tail quantile levels')
    parser.add_argument('--alpha', type=float, help='the level of the confidence intervals (default: 0.05)')
    parser.add_argument('--kernel', choices=[k.value for k in Kernel])
    parser.add_argument('--bandwidth-rule', choices=[r.value for r in BandwidthRule])
    parser.add_argument('--split', help='the first period of the second descriptive subsample (default: 2009Q1)')
    parser.add_argument('--threshold', type=float, help='the threshold of the above-threshold subsample')
    parser.add_argument('--max-lag', type=int, help='the largest lag of the dependence tables (default: 4)')
    parser.add_argument('--seed', type=int)
    parser.add_argument('--audit', action='store_const', const=True, help='write the AIC of every subset')
    parser.add_argument('--workers', type=int, help='threads fitting quantiles concurrently')
    parser.add_argument('--lenient', dest='strict', action='store_const', const=False,
                        help='trim leading and trailing missing cells instead of failing')


def _config(args: Namespace) -> StudyConfig:
    overrides = {name: getattr(args, name, None) for name in STUDY_FIELDS}
    return load_config(args.config, overrides)


def _print_table(rows: Sequence[Mapping[str, Any]], columns: Sequence[str]) -> None:
    pd.DataFrame(list(rows), columns=list(columns)).to_csv(sys.stdout, index=False, lineterminator='\n')


def _prepared(config: StudyConfig) -> Frame:
    frame, _ = prepare_frame(read_frame(config.input, config.strict), config)
    return frame


def ingest_check(args: Namespace) -> None:
    frame = read_frame(args.input, not args.lenient)
    _print_table([{'series': name, 'first': str(s.start), 'last': str(s.end), 'n': len(s)}
                  for name, s in frame.items()], ('series', 'first', 'last', 'n'))


def describe_command(args: Namespace) -> None:
    config = _config(args)
    tables = describe(_prepared(config), config.split_period)
    _print_table([{'sample': label, **row.to_dict()} for label, table in tables.items() for row in table.rows],
                 ('sample', *DESCRIPTIVE_COLUMNS))


def corr(args: Namespace) -> None:
    config = _config(args)
    frame = _prepared(config)
    if args.covariate:
        tables = []
        for covariate in args.covariate:
            for rule in (None, SubsampleRule.deflation(), SubsampleRule.above(config.threshold)):
                tables.append(lag_table(frame, config.response, covariate, config.max_lag, rule))
    else:
        tables, _ = dependence_tables(frame, config)
    _print_table([{'sample': t.sample, 'covariate': t.covariate, **row} for t in tables for row in t.rows()],
                 ('sample', 'covariate', *DEPENDENCE_COLUMNS))


def hpfilter(args: Namespace) -> None:
    series = read_frame(args.input, not args.lenient)[args.series]
    result = hp_gap(series if args.no_log else log_level(series), args.hp_lambda)
    _print_table([
        {'period': str(period), 'trend': trend, 'gap': gap}
        for period, trend, gap in zip(result.trend.periods(), result.trend.values, result.gap.values)
    ], ('period', 'trend', 'gap'))


def fit_command(args: Namespace) -> None:
    config = _config(args)
    frame = _prepared(config)
    design = assemble(frame, config.response, [(e['name'], e['lag']) for e in args.covariate or ()])
    rows = []
    for tau in args.tau:
        fit = qr_solver.fit(design, tau)
        _, _, table = infer(design, fit, config)
        rows.extend({'tau': tau, 'tail': '', **row} for row in table.rows())
    _print_table(rows, COEFFICIENT_COLUMNS)


def select(args: Namespace) -> None:
    config = _config(args)
    frame = _prepared(config)
    pool, _ = config.candidate_pool(frame)
    levels = args.tau or [tau for tau, _ in config.quantiles]
    rows = []
    for tau in levels:
        result = best_subset(frame, config.response, pool, tau, workers=config.workers)
        rows.append({'tau': tau, 'subset': '+'.join(result.subset), 'k': result.fit.p, 'n': result.n,
                     'aic': result.aic})
    _print_table(rows, ('tau', 'subset', 'k', 'n', 'aic'))


def study(args: Namespace) -> None:
    config = _config(args)
    report = run_study(config)
    print(f'{len(report.quantiles)} quantiles written to {config.output}')


def simulate(args: Namespace) -> None:
    output: Path = args.output
    if args.T < 2:
        raise ArgumentTypeError('simulations need at least 2 periods')
    study_config: Dict[str, Any]
    if args.model == 'location-scale':
        b = args.b or [1.0, 2.0]
        g = args.g or [0.5, 0.1]
        noise = Noise.normal() if args.noise == 'normal' else Noise.uniform()
        frame, _ = simulate_location_scale(LocationScaleParams(tuple(b), tuple(g), noise, args.T, args.seed))
        study_config = {'response': 'y', 'pool': [{'name': f'x{j}', 'lag': 0} for j in range(1, len(b))]}
    else:
        if args.model == 'nkpc':
            frame = simulate_nkpc(NkpcParams(
                theta=args.theta, beta_discount=args.beta_discount, shock_scale=args.shock_scale, T=args.T,
                seed=args.seed, pass_through=args.pass_through, expectations_noise=args.expectations_noise,
                measurement_noise=args.measurement_noise,
            ))
        else:
            frame = simulate_pc_exp(PcExpParams(beta=args.beta, lambda_=args.lambda_, gamma=args.gamma, T=args.T,
                                                seed=args.seed, shock_scale=args.measurement_noise))
        study_config = {'response': 'inflation', 'pool_preset': 'narrow'}
    start = next(iter(frame.values())).start
    output.parent.mkdir(parents=True, exist_ok=True)
    write_frame(frame, output)
    study_config.update({
        'input': output.name,
        'output': f'{output.stem}_study',
        'seed': args.seed,
        'split': str(start.shift(args.T // 2)),
    })
    write_json(output.with_name(f'{output.stem}.config.json'), study_config)
    print(f'{args.model} sample of {args.T} quarters written to {output}')


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog='tailflation', description='extreme quantile analysis of quarterly inflation')
    parser.add_argument('--log-level', default='WARNING', choices=('DEBUG', 'INFO', 'WARNING', 'ERROR'),
                        type=str.upper)
    commands = parser.add_subparsers(dest='command', required=True)

    sub = commands.add_parser('ingest-check', help='validate a quarterly CSV file and list its series')
    sub.add_argument('input', type=Path)
    sub.add_argument('--lenient', action='store_true')
    sub.set_defaults(handler=ingest_check)

    sub = commands.add_parser('describe', help='descriptive statistics of the prepared series')
    _add_study_flags(sub)
    sub.set_defaults(handler=describe_command)

    sub = commands.add_parser('corr', help='lag dependence tables of the response')
    _add_study_flags(sub)
    sub.add_argument('--covariate', action='append', help='restrict the tables to a covariate, may be repeated')
    sub.set_defaults(handler=corr)

    sub = commands.add_parser('hpfilter', help='HP trend and gap of an output level series')
    sub.add_argument('input', type=Path)
    sub.add_argument('--series', required=True)
    sub.add_argument('--hp-lambda', type=float, default=1600.0)
    sub.add_argument('--no-log', action='store_true', help='the series is already in logs')
    sub.add_argument('--lenient', action='store_true')
    sub.set_defaults(handler=hpfilter)

    sub = commands.add_parser('fit', help='fit a quantile regression with fixed covariates')
    _add_study_flags(sub)
    sub.add_argument('--tau', type=_level, action='append', required=True)
    sub.add_argument('--covariate', type=_pool_entry, action='append', help='NAME[:LAG], may be repeated')
    sub.set_defaults(handler=fit_command)

    sub = commands.add_parser('select', help='choose the AIC best subset of the pool per quantile')
    _add_study_flags(sub)
    sub.add_argument('--tau', type=_level, action='append', help='defaults to both configured grids')
    sub.set_defaults(handler=select)

    sub = commands.add_parser('study', help='run the full study and write its reports')
    _add_study_flags(sub)
    sub.add_argument('--output', type=Path, help='the report directory, replaced on success')
    sub.set_defaults(handler=study)

    sub = commands.add_parser('simulate', help='write a synthetic sample and a study configuration for it')
    sub.add_argument('model', choices=('nkpc', 'pc-exp', 'location-scale'))
    sub.add_argument('--output', type=Path, required=True, help='the CSV path')
    sub.add_argument('--T', type=int, default=200)
    sub.add_argument('--seed', type=int, default=0)
    sub.add_argument('--theta', type=float, default=0.75)
    sub.add_argument('--beta-discount', type=float, default=0.99)
    sub.add_argument('--shock-scale', type=float, default=0.01)
    sub.add_argument('--pass-through', type=float, default=0.2)
    sub.add_argument('--expectations-noise', type=float, default=0.002)
    sub.add_argument('--measurement-noise', type=float, default=0.002)
    sub.add_argument('--beta', type=float, default=0.5)
    sub.add_argument('--lambda', dest='lambda_', type=float, default=0.1)
    sub.add_argument('--gamma', type=float, default=0.1)
    sub.add_argument('--b', type=_floats)
    sub.add_argument('--g', type=_floats)
    sub.add_argument('--noise', choices=('uniform', 'normal'), default='uniform')
    sub.set_defaults(handler=simulate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format='%(levelname)s %(name)s: %(message)s')
    try:
        args.handler(args)
    except TailflationError as e:
        logger.error('%s failed', args.command, exc_info=args.log_level == 'DEBUG')
        print(f'error: {e}', file=sys.stderr)
        return e.exit_code
    except ArgumentTypeError as e:
        parser.error(str(e))
    return 0


if __name__ == '__main__':
    sys.exit(main())
