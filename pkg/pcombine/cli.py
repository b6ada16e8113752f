#!/usr/bin/env python
"""Command-line interface: ``pcombine <command> [options]``."""
from __future__ import annotations

import argparse
import configparser
import datetime
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from typing import Any
from typing import Callable
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np
import pandas as pd

from . import __version__
from . import metapipe
from . import powersim
from .base import CALIBRATE_OPTIONS
from .base import CombinerPool
from .cache import export_csv
from .cache import NullTableCache
from .core import DEFAULT_B
from .core import DEFAULT_TABLE_SEED
from .core import MethodSpec
from .core import parse_method_spec
from .core import read_pvalue_matrix
from .core import split_method_list
from .exceptions import DataError
from .exceptions import ResourceGuardError
from .exceptions import UsageError

logger = logging.getLogger(__name__)

#: Section of the configuration file holding defaults for every command
GLOBAL_SECTION = 'pcombine'

MANIFEST_FILENAME = 'manifest.json'

COMBINE_COLUMNS = ['id', 'method', 'statistic', 'pvalue', 'calibration', 'j_star']
TABLE_COLUMNS = ['method', 'K', 'B', 'seed', 'alpha', 'critical_value']
TYPE1_COLUMNS = ['method', 'K', 'alpha', 'reps', 'size', 'mc_se', 'seed']

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RESOURCE = 3


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser that raises :class:`UsageError` instead of exiting."""

    def error(self, message: str) -> Any:  # type: ignore
        raise UsageError(f'{self.prog}: {message}')


def _int_list(value: str) -> List[int]:
    try:
        return [int(x) for x in value.split(',') if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated integers: {value!r}')


def _float_list(value: str) -> List[float]:
    try:
        return [float(x) for x in value.split(',') if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated numbers: {value!r}')


def _mu0_rule(value: str) -> Any:
    if value.strip().lower() == 'select':
        return 'select'
    values = _float_list(value)
    return values[0] if len(values) == 1 else values


def _comparison(value: str) -> Tuple[str, str]:
    parts = value.split(':')
    if len(parts) != 2 or not all(p.strip() for p in parts):
        raise argparse.ArgumentTypeError(f'expected METHOD_A:METHOD_B: {value!r}')
    return parts[0].strip(), parts[1].strip()


#
# Run manifest
#


@dataclass
class RunManifest:
    """Everything needed to replay a run."""

    command: List[str]
    config: Dict[str, Any]
    seed: int
    table_keys: List[Tuple[str, int, int, int]] = field(default_factory=list)
    version: str = __version__
    started: str = ''
    elapsed_seconds: float = 0.0

    def write(self, out_dir: str) -> str:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, MANIFEST_FILENAME)
        with open(path, 'w', encoding='utf-8') as outfile:
            json.dump(asdict(self), outfile, indent=2, sort_keys=True)
            outfile.write('\n')
        logger.info('wrote manifest %s', path)
        return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, MethodSpec):
        return value.key
    if isinstance(value, (list, tuple)):
        return [_jsonable(x) for x in value]
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return str(value)


def _manifest(args: argparse.Namespace, pool: Optional[CombinerPool]) -> RunManifest:
    config = {
        k: _jsonable(v) for k, v in sorted(vars(args).items())
        if k not in ('func', 'argv', 'started_at')
    }
    return RunManifest(
        command=['pcombine'] + list(args.argv),
        config=config,
        seed=args.seed,
        table_keys=[list(k) for k in pool.cache.loaded()] if pool else [],  # type: ignore
        started=datetime.datetime.fromtimestamp(args.started_at).isoformat(),
        elapsed_seconds=round(time.time() - args.started_at, 3),
    )


#
# Helpers
#


def _pool(args: argparse.Namespace, calibrate: Optional[str] = None) -> CombinerPool:
    cache = NullTableCache(args.table_dir, threads=args.threads)
    return CombinerPool(
        B=args.B, seed=args.seed, cache=cache, threads=args.threads,
        calibrate=calibrate or getattr(args, 'calibrate', None) or 'auto',
    )


def _emit(frame: pd.DataFrame, out: Optional[str], filename: str) -> Optional[str]:
    """Write ``frame`` to ``out/filename``, or to stdout when ``out`` is None."""
    if out is None:
        frame.to_csv(sys.stdout, index=False, float_format='%.12g')
        return None
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, filename)
    frame.to_csv(path, index=False, float_format='%.12g')
    logger.info('wrote %s', path)
    return path


def _method_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return dict(
        tau=args.tau,
        tau_set=tuple(args.tau_set) if args.tau_set else None,
        delta=args.delta,
        gamma=args.gamma,
        constituents=tuple(args.constituents.split('+')) if args.constituents else None,
    )


#
# Commands
#


def cmd_combine(args: argparse.Namespace) -> int:
    """Combine every row of a wide p-value CSV."""
    overrides = _method_overrides(args)
    specs = [parse_method_spec(m, **overrides) for m in args.method]
    matrix = read_pvalue_matrix(args.input)
    left = None
    if args.left:
        left = read_pvalue_matrix(args.left)
        if left.ids != matrix.ids or left.values.shape != matrix.values.shape:
            raise DataError('--left must hold the same rows and columns as --input')

    K = matrix.values.shape[1]
    pool = _pool(args)
    rows: List[Dict[str, Any]] = []
    for spec in specs:
        combiner = pool.get(spec, K)
        for i, vec in enumerate(matrix.rows()):
            res = combiner.combine(vec, None if left is None else left.values[i])
            rows.append(dict(
                id=res.id, method=res.method, statistic=res.statistic,
                pvalue=res.pvalue, calibration=res.calibration.value,
                j_star='' if res.j_star is None else res.j_star,
            ))
    _emit(pd.DataFrame(rows, columns=COMBINE_COLUMNS), args.out, 'combined.csv')
    if args.out:
        _manifest(args, pool).write(args.out)
    return EXIT_OK


def cmd_table(args: argparse.Namespace) -> int:
    """Build (or load) null tables and report critical values."""
    for alpha in args.alpha:
        if args.B * alpha < 100:
            raise ResourceGuardError(
                f'B*alpha = {args.B * alpha:g} < 100; the {alpha:g} tail is unstable',
            )
    specs = [parse_method_spec(m, **_method_overrides(args)) for m in args.method]
    pool = _pool(args, calibrate='mc')
    rows = []
    for spec in specs:
        for K in args.K:
            combiner = pool.get(spec, K)
            table = combiner.table
            for alpha in args.alpha:
                rows.append(dict(
                    method=spec.key, K=K, B=table.B, seed=table.seed, alpha=alpha,
                    critical_value=combiner.critical_value(alpha),
                ))
            if args.export:
                os.makedirs(args.export, exist_ok=True)
                name = '%s_K%d_B%d_seed%d.csv' % (
                    spec.method.value, K, table.B, table.seed,
                )
                export_csv(table, os.path.join(args.export, name))
    _emit(pd.DataFrame(rows, columns=TABLE_COLUMNS), args.out, 'critical_values.csv')
    if args.out:
        _manifest(args, pool).write(args.out)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    """Power grids, presets and null-size estimates."""
    pool = _pool(args)
    if args.type1:
        methods = [parse_method_spec(m) for m in args.methods or ('fisher', 'afp', 'fe')]
        rows = []
        for spec in methods:
            for K in args.K or [10]:
                size = powersim.estimate_type1(
                    spec, K, args.alpha or 0.05, args.reps, seed=args.seed,
                    pool=pool, threads=args.threads,
                )
                rows.append(dict(
                    method=spec.key, K=K, alpha=args.alpha or 0.05, reps=args.reps,
                    size=size, mc_se=float(np.sqrt(size * (1 - size) / args.reps)),
                    seed=args.seed,
                ))
        _emit(pd.DataFrame(rows, columns=TYPE1_COLUMNS), args.out, 'type1.csv')
        _manifest(args, pool).write(args.out)
        return EXIT_OK

    overrides: Dict[str, Any] = dict(
        methods=args.methods, K_list=args.K, ell_fracs=args.ell_fracs,
        mu0_rule=args.mu0, alpha=args.alpha, sidedness=args.sidedness,
        target_power=args.target_power,
    )
    if args.preset:
        grid = powersim.run_preset(
            args.preset, reps=args.reps, seed=args.seed, pool=pool,
            threads=args.threads, **overrides,
        )
    else:
        if not args.methods or not args.K:
            raise UsageError('simulate needs --preset or both --methods and --K')
        kwargs = {k: v for k, v in overrides.items() if v is not None}
        grid = powersim.run_power_grid(
            reps=args.reps, seed=args.seed, pool=pool, threads=args.threads, **kwargs,
        )
    _emit(grid, args.out, 'power.csv')
    _emit(powersim.power_orderings(grid), args.out, 'orderings.csv')
    _manifest(args, pool).write(args.out)
    return EXIT_OK


def cmd_meta(args: argparse.Namespace) -> int:
    """Meta-analysis of per-study expression matrices."""
    studies = metapipe.read_studies(args.expr_dir, args.design)
    pool = _pool(args)
    analysis = metapipe.MetaAnalysis(
        args.methods, pool=pool, sign_threshold=args.sign_threshold,
    )
    results = analysis.run(studies)
    metapipe.write_results(
        results, args.out, comparisons=args.compare or None, q_cutoff=args.q_cutoff,
    )
    for method in results.methods:
        hits = int((results.q_value[method] <= args.q_cutoff).sum())
        logger.info('%s: %d of %d features at q <= %g', method, hits,
                    len(results.feature_ids), args.q_cutoff)
    _manifest(args, pool).write(args.out)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    """Write synthetic studies, a design file and the ground truth."""
    config = metapipe.SYNTH_PRESETS[args.preset]
    changes = {}
    if args.magnitude is not None:
        changes['magnitude'] = args.magnitude
    if args.study_fraction is not None:
        changes['study_fraction'] = args.study_fraction
    if changes:
        config = metapipe.SignalConfig(**{**asdict(config), **changes})
    studies, truth = metapipe.synth_studies(
        n_features=args.n_features, n_studies=args.n_studies,
        subjects_per_study=args.subjects, signal_config=config, seed=args.seed,
    )
    metapipe.write_studies(studies, args.out)
    _emit(truth, args.out, 'truth.csv')
    _manifest(args, None).write(args.out)
    return EXIT_OK


def _slope_theta(args: argparse.Namespace) -> List[float]:
    if len(args.mu) > 1:
        return list(args.mu)
    K = args.K or (1 if args.test == 'ztest' else 5)
    ell = K if args.ell is None else args.ell
    if not 0 <= ell <= K:
        raise UsageError(f'--ell must be in 0..K: {ell}')
    return [args.mu[0]] * ell + [0.0] * (K - ell)


def _slope_grid(args: argparse.Namespace) -> List[int]:
    if args.n_grid:
        return args.n_grid
    nmax = args.nmax
    return sorted({max(1, nmax // 100), max(1, nmax // 10), nmax})


def cmd_slope(args: argparse.Namespace) -> int:
    """Empirical exact slopes or AFp subset selection rates."""
    n_grid = _slope_grid(args)
    if args.selection:
        theta = _slope_theta(args)
        ell = sum(1 for x in theta if x != 0)
        res = powersim.afp_consistency_check(
            len(theta), ell, args.mu[0], n_grid=n_grid, reps=args.reps, seed=args.seed,
        )
        _emit(res.to_frame(), args.out, 'selection.csv')
    else:
        theta = _slope_theta(args)
        trace = powersim.estimate_exact_slope(
            args.test, theta if args.test != 'ztest' else theta[:1],
            lambdas=args.lambdas, n_grid=n_grid, reps=args.reps, seed=args.seed,
        )
        logger.info(
            'slope of %s at n=%d: %.4f (theory %s)', trace.test, trace.n_grid[-1],
            trace.slope_estimates[-1], trace.c_theory,
        )
        _emit(trace.to_frame(), args.out, 'slope.csv')
    if args.out:
        _manifest(args, None).write(args.out)
    return EXIT_OK


#
# Parser
#


def _common_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    group = common.add_argument_group('common options')
    group.add_argument('--seed', type=int, help='seed of all random streams')
    group.add_argument(
        '--threads', type=int, help='worker threads (never changes results)',
    )
    group.add_argument(
        '--table-dir', help='null table cache directory (default: $PCOMBINE_TABLE_DIR)',
    )
    group.add_argument('--config', help='INI configuration file')
    group.add_argument('-v', '--verbose', action='count', default=0)
    group.add_argument('-q', '--quiet', action='store_true')
    return common


def _add_method_params(p: ArgumentParser) -> None:
    p.add_argument('--tau', type=float, help='truncation threshold of TFhard / TFsoft')
    p.add_argument(
        '--tau-set', type=_float_list, help='omnibus thresholds, e.g. 0.01,0.05,1',
    )
    p.add_argument('--delta', type=float, help='truncated Cauchy level')
    p.add_argument('--gamma', type=float, help='Pareto tail index')
    p.add_argument('--constituents', help='ensemble constituents, e.g. fisher+afp+minp')


def _add_table_size(p: ArgumentParser) -> None:
    p.add_argument('--B', '-B', dest='B', type=int, help='Monte Carlo table size')


def build_parser() -> ArgumentParser:
    common = _common_parser()
    parser = ArgumentParser(
        prog='pcombine', description='Combine p-values across studies.',
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    def add(name: str, func: Callable[[argparse.Namespace], int], text: str) -> Any:
        p = commands.add_parser(name, help=text, description=text, parents=[common])
        p.set_defaults(func=func)
        return p

    p = add('combine', cmd_combine, 'combine each row of a p-value matrix')
    p.add_argument('--input', '-i', required=True, help='CSV with header id,p1,...,pK')
    p.add_argument(
        '--method', '-m', type=split_method_list, required=True,
        help='method list, e.g. fisher,afp,tfhard(tau=0.05)',
    )
    p.add_argument('--left', help='left one-sided p-values for fecs / pearson')
    p.add_argument('--calibrate', choices=CALIBRATE_OPTIONS)
    p.add_argument('--out', '-o', help='output directory (default: stdout)')
    _add_method_params(p)
    _add_table_size(p)

    p = add('table', cmd_table, 'build null tables and print critical values')
    p.add_argument('--method', '-m', type=split_method_list, required=True)
    p.add_argument('--K', '-K', dest='K', type=_int_list, required=True)
    p.add_argument('--alpha', type=_float_list, help='levels (default 0.01,0.05)')
    p.add_argument('--export', help='also write each table as CSV into this directory')
    p.add_argument('--out', '-o', help='output directory (default: stdout)')
    _add_method_params(p)
    _add_table_size(p)

    p = add('simulate', cmd_simulate, 'power and size simulations')
    p.add_argument('--preset', choices=sorted(powersim.PRESETS))
    p.add_argument('--methods', type=split_method_list)
    p.add_argument('--K', '-K', dest='K', type=_int_list)
    p.add_argument('--ell-fracs', type=_float_list)
    p.add_argument('--mu0', type=_mu0_rule, help="'select' or comma-separated values")
    p.add_argument('--alpha', type=float)
    p.add_argument('--sidedness', choices=[s.value for s in powersim.Sidedness])
    p.add_argument('--target-power', type=float)
    p.add_argument('--reps', type=int)
    p.add_argument('--type1', action='store_true', help='estimate null size instead')
    p.add_argument('--out', '-o', required=True)
    _add_table_size(p)

    p = add('meta', cmd_meta, 'meta-analysis of feature-by-study expression data')
    p.add_argument('--expr-dir', required=True)
    p.add_argument('--design', required=True)
    p.add_argument('--methods', type=split_method_list)
    p.add_argument('--q-cutoff', type=float)
    p.add_argument('--sign-threshold', type=float)
    p.add_argument(
        '--compare', type=_comparison, action='append',
        help='method pair for categories.csv, e.g. fisher:afp (repeatable)',
    )
    p.add_argument('--calibrate', choices=CALIBRATE_OPTIONS)
    p.add_argument('--out', '-o', required=True)
    _add_table_size(p)

    p = add('synth', cmd_synth, 'write synthetic studies')
    p.add_argument('--preset', choices=sorted(metapipe.SYNTH_PRESETS))
    p.add_argument('--n-features', type=int)
    p.add_argument('--n-studies', type=int)
    p.add_argument('--subjects', type=int)
    p.add_argument('--magnitude', type=float)
    p.add_argument('--study-fraction', type=float)
    p.add_argument('--out', '-o', required=True)

    p = add('slope', cmd_slope, 'empirical exact slopes')
    p.add_argument('--test', choices=powersim.SLOPE_TESTS)
    p.add_argument('--mu', type=_float_list, help='shared effect or one per study')
    p.add_argument('--K', '-K', dest='K', type=int)
    p.add_argument('--ell', type=int, help='number of signal studies')
    p.add_argument('--lambdas', type=_float_list)
    p.add_argument('--nmax', type=int)
    p.add_argument('--n-grid', type=_int_list)
    p.add_argument('--reps', type=int)
    p.add_argument('--selection', action='store_true', help='AFp subset selection rates')
    p.add_argument('--out', '-o', help='output directory (default: stdout)')

    return parser


#: Built-in defaults, applied after the configuration file
BUILTINS: Dict[str, Dict[str, Any]] = {
    GLOBAL_SECTION: dict(seed=DEFAULT_TABLE_SEED, B=DEFAULT_B, calibrate='auto'),
    'table': dict(alpha=[0.01, 0.05]),
    'simulate': dict(reps=10_000),
    'meta': dict(
        methods=['fisher', 'afp', 'fe', 'fecs'],
        q_cutoff=0.05, sign_threshold=0.05,
    ),
    'synth': dict(preset='concordant', n_features=500, n_studies=8, subjects=20),
    'slope': dict(test='ztest', mu=[1.5], nmax=10_000, reps=200),
}


def _convert(parser: argparse.ArgumentParser, dest: str, text: str) -> Any:
    for action in parser._actions:
        if action.dest != dest:
            continue
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            return configparser.ConfigParser.BOOLEAN_STATES.get(text.lower(), False)
        if action.type is None:
            return text
        try:
            return action.type(text)  # type: ignore
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f'invalid configuration value for {dest}: {exc}')
    raise UsageError(f'unknown configuration option: {dest}')


def load_config(path: str) -> configparser.ConfigParser:
    """Read an INI configuration file."""
    config = configparser.ConfigParser()
    try:
        with open(path, 'r', encoding='utf-8') as infile:
            config.read_file(infile)
    except OSError as exc:
        raise UsageError(f'could not read configuration {path}: {exc}') from exc
    except configparser.Error as exc:
        raise UsageError(f'malformed configuration {path}: {exc}') from exc
    return config


def resolve_options(
    args: argparse.Namespace,
    parser: argparse.ArgumentParser,
    config: Optional[configparser.ConfigParser] = None,
) -> argparse.Namespace:
    """
    Fill unset options: configuration file, then environment, then built-ins.

    Options given on the command line are never changed.

    """
    command = args.command
    sub = next(
        a.choices[command] for a in parser._actions
        if isinstance(a, argparse._SubParsersAction)
    )
    for section in (command, GLOBAL_SECTION):
        if config is None or not config.has_section(section):
            continue
        # ConfigParser lowercases keys; K and B keep their case as option dests
        values = dict(
            (k.replace('-', '_'), v) for k, v in config.items(section)
        )
        for key, text in values.items():
            dest = {'b': 'B', 'k': 'K'}.get(key, key)
            if dest in ('config', 'verbose') or not hasattr(args, dest):
                if section == command:
                    raise UsageError(f'[{section}] {key} is not a configurable option')
                continue
            if getattr(args, dest) is None or getattr(args, dest) is False:
                setattr(args, dest, _convert(sub, dest, text))

    if args.table_dir is None:
        args.table_dir = os.environ.get('PCOMBINE_TABLE_DIR') or None

    for section in (command, GLOBAL_SECTION):
        for dest, value in BUILTINS.get(section, {}).items():
            if hasattr(args, dest) and getattr(args, dest) is None:
                setattr(args, dest, value)
    return args


def _setup_logging(args: argparse.Namespace) -> None:
    level = logging.WARNING
    if args.quiet:
        level = logging.ERROR
    elif args.verbose == 1:
        level = logging.INFO
    elif args.verbose and args.verbose > 1:
        level = logging.DEBUG
    logging.basicConfig(
        level=level, stream=sys.stderr,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )
    logging.getLogger('pcombine').setLevel(level)
    logging.captureWarnings(True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = load_config(args.config) if args.config else None
        args = resolve_options(args, parser, config)
        args.argv = argv
        args.started_at = time.time()
        _setup_logging(args)
        return args.func(args)
    except UsageError as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_DATA
    except ResourceGuardError as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == '__main__':
    sys.exit(main())
