#!/usr/bin/env python
"""Power, type-I error, exact-slope and selection-consistency simulations."""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
import pandas as pd
from scipy import special

from . import combiners
from .base import Combiner
from .base import CombinerPool
from .core import DEFAULT_TABLE_SEED
from .core import MethodSpec
from .core import parse_method_spec
from .core import PValueVector
from .exceptions import ResourceGuardError
from .exceptions import UsageError
from .nulldist import critical_value as table_critical_value
from .nulldist import NullTable
from .nulldist import rejects
from .rng import map_blocks
from .rng import normal_rows
from .rng import Stream
from .rng import uniform_rows
from .special import chi2_logsf
from .special import norm_isf_log
from .special import norm_logsf
from .special import norm_sf

logger = logging.getLogger(__name__)

#: Signal strengths scanned when choosing mu0
MU0_GRID: Tuple[float, ...] = tuple(round(0.5 + 0.15 * i, 2) for i in range(31))

#: Signal fractions l/K of the power grids
ELL_FRACS: Tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)

POWER_COLUMNS = [
    'method', 'K', 'ell', 'mu0', 'alpha', 'sidedness', 'reps', 'power', 'mc_se', 'seed',
]
SLOPE_COLUMNS = ['test', 'theta', 'n', 'slope_estimate', 'c_theory']

MIN_REPS = 1000


class Sidedness(str, enum.Enum):
    """
    P-values read by the methods that are not directional.

    Signals always share the mean ``+mu0``. ``TwoSided`` cells feed those
    methods ``2(1 - Phi(|X|))``; ``OneSided`` cells feed them the left
    one-sided ``1 - Phi(X)``. FE_CS and Pearson always read the one-sided
    p-values.

    """

    TWO_SIDED = 'TwoSided'
    ONE_SIDED = 'OneSided'


@dataclass(frozen=True)
class SimScenario:
    """One cell of a Gaussian-mean power simulation."""

    K: int
    ell: int
    mu0: float
    alpha: float = 0.01
    sidedness: Sidedness = Sidedness.TWO_SIDED
    reps: int = 10_000
    seed: int = DEFAULT_TABLE_SEED

    def __post_init__(self) -> None:
        object.__setattr__(self, 'sidedness', Sidedness(self.sidedness))
        if self.K < 1:
            raise UsageError(f'K must be positive: {self.K}')
        if not 0 <= self.ell <= self.K:
            raise UsageError(f'ell must be in 0..K: {self.ell}')
        if self.reps < MIN_REPS:
            raise UsageError(f'reps must be at least {MIN_REPS}: {self.reps}')
        if not 0.0 < self.alpha <= 0.5:
            raise UsageError(f'alpha must be in (0, 0.5]: {self.alpha}')

    @property
    def mu(self) -> np.ndarray:
        """Mean vector: ``ell`` signals followed by ``K - ell`` zeros."""
        mu = np.zeros(self.K)
        mu[:self.ell] = self.mu0
        return mu

    def replace(self, **kwargs: Any) -> 'SimScenario':
        data = asdict(self)
        data.update(kwargs)
        return SimScenario(**data)


@dataclass(frozen=True)
class PowerEstimate:
    """Rejection rate of a method in a scenario."""

    scenario: SimScenario
    method: MethodSpec
    power: float
    mc_se: float = field(init=False)

    def __post_init__(self) -> None:
        power = float(self.power)
        object.__setattr__(
            self, 'mc_se', math.sqrt(power * (1.0 - power) / self.scenario.reps),
        )

    def as_row(self) -> Dict[str, Any]:
        s = self.scenario
        return dict(
            method=self.method.key, K=s.K, ell=s.ell, mu0=s.mu0, alpha=s.alpha,
            sidedness=s.sidedness.value, reps=s.reps, power=self.power,
            mc_se=self.mc_se, seed=s.seed,
        )


def gaussian_pvalue_rows(
    scenario: SimScenario,
    start: int,
    stop: int,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Two-sided, left and right one-sided p-values for replicates ``start..stop-1``."""
    x = normal_rows(scenario.seed, Stream.SIMULATION, start, stop, scenario.K)
    x += scenario.mu[None, :]
    two = np.minimum(2.0 * np.asarray(norm_sf(np.abs(x))), 1.0)
    left = np.asarray(norm_sf(x))
    right = np.asarray(special.ndtr(x))
    return two, left, right


def gen_gaussian_pvalues(
    scenario: SimScenario,
    replicate: int,
) -> Tuple[PValueVector, PValueVector, PValueVector]:
    """
    P-values of one replicate of the Gaussian-mean model.

    Returns
    -------
    (two_sided, left, right)
        ``2(1 - Phi(|X|))``, ``1 - Phi(X)`` and ``Phi(X)``

    """
    two, left, right = gaussian_pvalue_rows(scenario, replicate, replicate + 1)
    return tuple(  # type: ignore
        PValueVector(tuple(float(x) for x in row[0])) for row in (two, left, right)
    )


def _combiner(
    method: Union[MethodSpec, str, Combiner],
    K: int,
    pool: Optional[CombinerPool],
) -> Combiner:
    if isinstance(method, Combiner):
        if method.K != K:
            raise UsageError(f'combiner set up for K={method.K}, scenario has K={K}')
        return method
    pool = pool or CombinerPool()
    return pool.get(method, K)


def resolve_critical_value(
    combiner: Combiner,
    alpha: float,
    crit: Union[None, float, NullTable] = None,
) -> float:
    """Critical value at ``alpha`` from ``crit`` or from the combiner itself."""
    if crit is None:
        return combiner.critical_value(alpha)
    if isinstance(crit, NullTable):
        if crit.K != combiner.K or crit.method.key != combiner.spec.key:
            raise UsageError(
                f'{crit!r} does not calibrate {combiner.spec.key} at K={combiner.K}',
            )
        return table_critical_value(crit, alpha)
    return float(crit)


def _count_rejections(
    combiner: Combiner,
    crit: float,
    scenario: SimScenario,
    threads: Optional[int],
) -> int:
    one_sided = (
        combiner.spec.is_one_sided or scenario.sidedness is Sidedness.ONE_SIDED
    )

    def block(start: int, stop: int) -> int:
        two, left, _ = gaussian_pvalue_rows(scenario, start, stop)
        stats = combiner.statistics(left if one_sided else two)
        return int(np.count_nonzero(rejects(stats, crit, combiner.direction)))

    return sum(map_blocks(block, scenario.reps, threads))


def estimate_power(
    method: Union[MethodSpec, str, Combiner],
    scenario: SimScenario,
    crit: Union[None, float, NullTable] = None,
    pool: Optional[CombinerPool] = None,
    threads: Optional[int] = None,
) -> PowerEstimate:
    """
    Fraction of replicates whose statistic is at least as extreme as ``crit``.

    Parameters
    ----------
    method : MethodSpec, str or Combiner
        The method
    scenario : SimScenario
        Simulation cell
    crit : float or NullTable, optional
        Critical value, or a table to derive it from at ``scenario.alpha``;
        defaults to the method's own calibration
    pool : CombinerPool, optional
        Source of combiners and tables
    threads : int, optional
        Worker threads

    Returns
    -------
    PowerEstimate

    """
    combiner = _combiner(method, scenario.K, pool)
    crit_value = resolve_critical_value(combiner, scenario.alpha, crit)
    hits = _count_rejections(combiner, crit_value, scenario, threads)
    return PowerEstimate(
        scenario=scenario, method=combiner.spec, power=hits / scenario.reps,
    )


def estimate_type1(
    method: Union[MethodSpec, str, Combiner],
    K: int,
    alpha: float,
    reps: int,
    seed: int = DEFAULT_TABLE_SEED,
    pool: Optional[CombinerPool] = None,
    threads: Optional[int] = None,
) -> float:
    """
    Empirical size under the global null using the method's own p-value path.

    Null replicates come from a stream separate from the one used to build
    calibration tables.

    """
    if reps * alpha < 100:
        raise ResourceGuardError(f'reps*alpha = {reps * alpha:g} < 100')
    combiner = _combiner(method, K, pool)

    def block(start: int, stop: int) -> int:
        p = uniform_rows(seed, Stream.NULL_SIMULATION, start, stop, K)
        return int(np.count_nonzero(combiner.pvalues(p) <= alpha))

    return sum(map_blocks(block, reps, threads)) / reps


def _ell_for(K: int, frac: float) -> int:
    return min(K, max(1, int(round(frac * K))))


def run_power_grid(
    methods: Sequence[Union[MethodSpec, str]],
    K_list: Sequence[int],
    ell_fracs: Sequence[float] = ELL_FRACS,
    mu0_rule: Union[str, float, Sequence[float]] = 'select',
    alpha: float = 0.01,
    reps: int = 10_000,
    seed: int = DEFAULT_TABLE_SEED,
    sidedness: Union[str, Sidedness] = Sidedness.TWO_SIDED,
    target_power: float = 0.5,
    pool: Optional[CombinerPool] = None,
    threads: Optional[int] = None,
) -> pd.DataFrame:
    """
    Full factorial power sweep.

    Parameters
    ----------
    methods : sequence of MethodSpecs
        Methods compared in every cell
    K_list : sequence of ints
        Numbers of p-values
    ell_fracs : sequence of floats, optional
        Signal fractions; ``ell = round(frac * K)``, at least 1
    mu0_rule : 'select', float or sequence of floats, optional
        ``'select'`` scans :data:`MU0_GRID` upward and keeps the smallest
        mu0 at which the best method reaches ``target_power``; a number
        fixes mu0; a sequence reports every listed mu0
    alpha : float, optional
        Significance level
    reps : int, optional
        Replicates per cell
    seed : int, optional
        Seed of the simulation stream
    sidedness : Sidedness, optional
        P-values read by the methods that are not directional
    target_power : float, optional
        Power the best method must reach under the ``'select'`` rule
    pool : CombinerPool, optional
        Source of combiners and tables
    threads : int, optional
        Worker threads

    Returns
    -------
    pandas.DataFrame
        Long format with columns ``method,K,ell,mu0,alpha,sidedness,reps,
        power,mc_se,seed``

    """
    pool = pool or CombinerPool(threads=threads)
    specs = [parse_method_spec(m) for m in methods]
    if not specs:
        raise UsageError('at least one method is required')
    if isinstance(mu0_rule, str):
        if mu0_rule != 'select':
            raise UsageError(f'unknown mu0 rule: {mu0_rule!r}')
        mu0_list: Sequence[float] = MU0_GRID
        select = True
    elif isinstance(mu0_rule, (int, float)):
        mu0_list, select = [float(mu0_rule)], False
    else:
        mu0_list, select = [float(x) for x in mu0_rule], False

    rows: List[Dict[str, Any]] = []
    for K in K_list:
        combs = [pool.get(s, K) for s in specs]
        crits = [c.critical_value(alpha) for c in combs]
        for frac in ell_fracs:
            ell = _ell_for(K, frac)
            cell: List[PowerEstimate] = []
            for mu0 in mu0_list:
                scenario = SimScenario(
                    K=K, ell=ell, mu0=mu0, alpha=alpha, sidedness=sidedness,
                    reps=reps, seed=seed,
                )
                cell = [
                    estimate_power(c, scenario, crit=crit, threads=threads)
                    for c, crit in zip(combs, crits)
                ]
                if not select:
                    rows.extend(e.as_row() for e in cell)
                elif max(e.power for e in cell) >= target_power:
                    break
            if select:
                rows.extend(e.as_row() for e in cell)
            logger.info(
                'power cell K=%d ell=%d mu0=%g: %s', K, ell, cell[0].scenario.mu0,
                ', '.join('%s=%.3f' % (e.method.key, e.power) for e in cell),
            )
    return pd.DataFrame(rows, columns=POWER_COLUMNS)


def power_orderings(grid: pd.DataFrame) -> pd.DataFrame:
    """Per grid cell, the methods ranked by decreasing power."""
    out = []
    keys = ['K', 'ell', 'mu0', 'alpha', 'sidedness']
    for key, group in grid.groupby(keys, sort=True):
        ranked = group.sort_values(['power', 'method'], ascending=[False, True])
        out.append(dict(
            zip(keys, key),
            best=ranked['method'].iloc[0],
            ordering=' > '.join(ranked['method']),
        ))
    return pd.DataFrame(out, columns=keys + ['best', 'ordering'])


@dataclass(frozen=True)
class GridPreset:
    methods: Tuple[str, ...]
    K_list: Tuple[int, ...] = (10, 20, 40, 80)
    ell_fracs: Tuple[float, ...] = ELL_FRACS
    alpha: float = 0.01
    sidedness: Sidedness = Sidedness.TWO_SIDED
    target_power: float = 0.5
    mu0_rule: Union[str, float] = 'select'


_SPARSE_METHODS = ('minp', 'cauchy', 'harmonicmean', 'bj', 'hc')

PRESETS: Dict[str, GridPreset] = {
    'fig1': GridPreset(
        methods=('fisher', 'stouffer', 'afp', 'afz', 'otfhard', 'otfsoft'),
    ),
    'fig1-all': GridPreset(
        methods=('fisher', 'stouffer', 'afp', 'afz', 'otfhard', 'otfsoft')
        + _SPARSE_METHODS,
    ),
    'fig2': GridPreset(methods=('fisher', 'afp', 'fe')),
    'fig3': GridPreset(
        methods=('fe', 'fecs', 'pearson'), alpha=0.001, target_power=0.6,
    ),
    'null': GridPreset(
        methods=('fisher', 'stouffer', 'afp', 'fe', 'fecs', 'pearson'),
        ell_fracs=(0.1,), K_list=(10, 20), alpha=0.05, mu0_rule=0.0,
    ),
}


def run_preset(
    name: str,
    reps: int = 10_000,
    seed: int = DEFAULT_TABLE_SEED,
    pool: Optional[CombinerPool] = None,
    threads: Optional[int] = None,
    **overrides: Any,
) -> pd.DataFrame:
    """Run one of the named grids in :data:`PRESETS`."""
    try:
        preset = PRESETS[name.lower()]
    except KeyError:
        raise UsageError(
            f'unknown preset {name!r}; choose from {", ".join(sorted(PRESETS))}',
        )
    kwargs: Dict[str, Any] = dict(
        methods=preset.methods, K_list=preset.K_list, ell_fracs=preset.ell_fracs,
        mu0_rule=preset.mu0_rule, alpha=preset.alpha, sidedness=preset.sidedness,
        target_power=preset.target_power,
    )
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return run_power_grid(reps=reps, seed=seed, pool=pool, threads=threads, **kwargs)


#
# Exact slopes
#

SLOPE_TESTS = ('ztest', 'fisher', 'stouffer', 'afp', 'minp', 'cauchy')


@dataclass(frozen=True)
class SlopeTrace:
    """Averaged ``-(2/n) log p`` along a grid of sample sizes."""

    test: str
    theta: Tuple[float, ...]
    lambdas: Tuple[float, ...]
    n_grid: Tuple[int, ...]
    slope_estimates: Tuple[float, ...]
    slope_se: Tuple[float, ...]
    c_theory: Optional[float] = None

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise UsageError('n_grid must be strictly increasing')

    def to_frame(self) -> pd.DataFrame:
        theta = self.theta[0] if len(set(self.theta)) == 1 else max(self.theta)
        return pd.DataFrame(
            dict(
                test=self.test, theta=theta, n=list(self.n_grid),
                slope_estimate=list(self.slope_estimates), c_theory=self.c_theory,
            ),
            columns=SLOPE_COLUMNS,
        )


def _slope_test(test: Union[str, MethodSpec]) -> str:
    if isinstance(test, MethodSpec):
        name = test.method.value
    else:
        name = test.strip().lower()
        if name not in ('ztest', 'z'):
            name = parse_method_spec(name).method.value
        else:
            name = 'ztest'
    if name not in SLOPE_TESTS:
        raise UsageError(
            f'exact slopes are estimated for {", ".join(SLOPE_TESTS)}; got {name!r}',
        )
    return name


def theoretical_slope(
    test: Union[str, MethodSpec],
    theta: Sequence[float],
    lambdas: Sequence[float],
) -> float:
    """
    Exact slope for per-study z-tests with slopes ``theta_i ** 2``.

    Fisher and AFp attain ``sum lambda_i c_i``; Stouffer
    ``(sum sqrt(lambda_i c_i))**2 / K``; minP and Cauchy ``max lambda_i c_i``.

    """
    name = _slope_test(test)
    th = np.asarray(theta, dtype=np.float64)
    lam = np.asarray(lambdas, dtype=np.float64)
    c = th ** 2
    if name == 'ztest':
        return float(c[0])
    lc = lam * c
    if name in ('fisher', 'afp'):
        return float(lc.sum())
    if name == 'stouffer':
        return float(np.sqrt(lc).sum() ** 2 / len(lc))
    return float(lc.max())


def _combined_log_pvalue(name: str, logp: np.ndarray) -> np.ndarray:
    """Log combined p-value of rows of per-study log p-values."""
    K = logp.shape[1]
    if name == 'fisher':
        return np.asarray(chi2_logsf(-2.0 * logp.sum(axis=1), 2 * K))
    if name == 'stouffer':
        z = np.asarray(norm_isf_log(logp)).sum(axis=1)
        return np.asarray(norm_logsf(z / math.sqrt(K)))
    if name == 'afp':
        obj = combiners.afp_objective_from_logs(np.sort(logp, axis=1))
        # Bonferroni bound over the K partial sums
        return np.minimum(0.0, -obj.max(axis=1) + math.log(K))
    if name == 'minp':
        lmin = logp.min(axis=1)
        with np.errstate(divide='ignore', invalid='ignore'):
            exact = np.log(-np.expm1(K * np.log1p(-np.exp(lmin))))
        return np.where(lmin > -20.0, exact, math.log(K) + lmin)
    if name == 'cauchy':
        neg = -logp
        top = neg.max(axis=1)
        with np.errstate(over='ignore'):
            direct = np.asarray(
                combiners.cauchy_stat(np.exp(logp)),
            )
            direct_logp = np.log(np.maximum(
                0.5 - np.arctan(direct) / math.pi, np.finfo(np.float64).tiny,
            ))
        # Tail form: h(p) ~ 1/(pi p), so log T ~ logsumexp(-log p) - log(pi K)
        log_t = special.logsumexp(neg, axis=1) - math.log(math.pi * K)
        tail_logp = -math.log(math.pi) - log_t
        return np.where(top > 30.0, tail_logp, direct_logp)
    raise UsageError(f'no log-scale p-value for {name}')


def _study_log_pvalues(z: np.ndarray) -> np.ndarray:
    return math.log(2.0) + np.asarray(norm_logsf(np.abs(z)))


def estimate_exact_slope(
    test: Union[str, MethodSpec],
    theta: Union[float, Sequence[float]],
    lambdas: Optional[Sequence[float]] = None,
    n_grid: Sequence[int] = (100, 1000, 10_000),
    reps: int = 200,
    seed: int = DEFAULT_TABLE_SEED,
) -> SlopeTrace:
    """
    Estimate the exact slope by simulation.

    Each study observes ``z_i = sqrt(lambda_i n) theta_i + N(0, 1)`` and
    reports the two-sided p-value; combined p-values are computed on the
    log scale so they never underflow.

    Parameters
    ----------
    test : str or MethodSpec
        ``'ztest'`` for a single z-test or one of fisher, stouffer, afp, minp,
        cauchy
    theta : float or sequence of floats
        Per-study effects (a scalar is shared by all studies)
    lambdas : sequence of floats, optional
        Sample-size ratios summing to K; defaults to all ones
    n_grid : sequence of ints, optional
        Strictly increasing sample sizes
    reps : int, optional
        Replicates per sample size
    seed : int, optional
        Seed of the slope stream

    Returns
    -------
    SlopeTrace

    """
    name = _slope_test(test)
    if lambdas is None:
        K = 1 if np.ndim(theta) == 0 else len(theta)  # type: ignore
        lam = np.ones(K)
    else:
        lam = np.asarray(lambdas, dtype=np.float64)
        K = len(lam)
    if name == 'ztest':
        lam = lam[:1]
        K = 1
        th = np.atleast_1d(np.asarray(theta, dtype=np.float64))[:1].copy()
    else:
        th = np.broadcast_to(np.asarray(theta, dtype=np.float64), (K,)).copy()
    if (lam <= 0).any():
        raise UsageError('sample-size ratios must be positive')
    if not math.isclose(lam.sum(), K, rel_tol=1e-9):
        raise UsageError(f'sample-size ratios must sum to K={K}: {lam.sum()}')
    if reps < 2:
        raise UsageError('at least two replicates are required')

    grid = tuple(int(n) for n in n_grid)
    estimates: List[float] = []
    ses: List[float] = []
    for idx, n in enumerate(grid):
        noise = normal_rows(seed, Stream.SLOPE, idx * reps, (idx + 1) * reps, K)
        z = np.sqrt(lam * n)[None, :] * th[None, :] + noise
        logp = _study_log_pvalues(z)
        if name != 'ztest':
            logp = _combined_log_pvalue(name, logp)
        slopes = -(2.0 / n) * np.asarray(logp).reshape(reps)
        estimates.append(float(slopes.mean()))
        ses.append(float(slopes.std(ddof=1) / math.sqrt(reps)))
        logger.debug('slope %s n=%d: %.4f (se %.4f)', name, n, estimates[-1], ses[-1])

    return SlopeTrace(
        test=name,
        theta=tuple(float(x) for x in th),
        lambdas=tuple(float(x) for x in lam),
        n_grid=grid,
        slope_estimates=tuple(estimates),
        slope_se=tuple(ses),
        c_theory=theoretical_slope(name, th, lam),
    )


@dataclass(frozen=True)
class SelectionConsistency:
    """Agreement of the AFp-selected subset with the true signal set."""

    K: int
    ell: int
    mu: float
    n_grid: Tuple[int, ...]
    agreement: Tuple[float, ...]
    reps: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            dict(n=list(self.n_grid), agreement=list(self.agreement), reps=self.reps),
        )


def afp_consistency_check(
    K: int,
    ell: int,
    mu: float,
    n_grid: Sequence[int] = (100, 1000, 10_000),
    reps: int = 200,
    seed: int = DEFAULT_TABLE_SEED,
) -> SelectionConsistency:
    """
    Rate at which AFp selects exactly the signal studies, per sample size.

    The first ``ell`` of ``K`` equally sized studies carry effect ``mu``.

    """
    if not 1 <= ell <= K:
        raise UsageError(f'ell must be in 1..K for a selection check: {ell}')
    if mu <= 0:
        raise UsageError('signal studies need a positive effect')
    truth = np.zeros(K, dtype=np.int8)
    truth[:ell] = 1
    theta = truth * float(mu)

    rates: List[float] = []
    for idx, n in enumerate(n_grid):
        noise = normal_rows(seed, Stream.SELECTION, idx * reps, (idx + 1) * reps, K)
        logp = _study_log_pvalues(math.sqrt(n) * theta[None, :] + noise)
        obj = combiners.afp_objective_from_logs(np.sort(logp, axis=1))
        j_star = np.argmax(obj, axis=1) + 1
        selected = combiners.selected_weights_matrix(logp, j_star)
        rates.append(float((selected == truth[None, :]).all(axis=1).mean()))
        logger.debug('selection n=%d: agreement %.3f', n, rates[-1])

    return SelectionConsistency(
        K=K, ell=ell, mu=float(mu), n_grid=tuple(int(n) for n in n_grid),
        agreement=tuple(rates), reps=reps,
    )

