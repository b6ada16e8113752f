#!/usr/bin/env python
"""Null-distribution calibration: analytic survival functions and Monte Carlo tables."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Any
from typing import Callable
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np

from . import combiners
from .core import Calibration
from .core import CombineResult
from .core import DEFAULT_B
from .core import DEFAULT_MEMORY_BUDGET
from .core import DEFAULT_TABLE_SEED
from .core import Direction
from .core import Method
from .core import MethodSpec
from .core import OMNIBUS_METHODS
from .core import parse_method_spec
from .core import PValueVector
from .core import validate
from .exceptions import ResourceGuardError
from .exceptions import UsageError
from .rng import map_blocks
from .rng import Stream
from .rng import uniform_rows
from .special import cauchy_sf
from .special import chi2_sf
from .special import norm_sf

logger = logging.getLogger(__name__)

#: Smallest table size accepted by :func:`build_null_table`
MIN_TABLE_SIZE = 1000

#: Minimum expected number of table entries beyond a critical value
MIN_TAIL_COUNT = 100

StatisticFn = Callable[[np.ndarray], np.ndarray]
TableFactory = Callable[[MethodSpec, int], 'NullTable']


@dataclass(frozen=True, eq=False)
class NullTable:
    """
    Sorted Monte Carlo reference distribution of a statistic under the global null.

    Parameters
    ----------
    method : MethodSpec
        Method whose statistic the table holds
    K : int
        Number of p-values per replicate
    B : int
        Number of replicates
    seed : int
        Seed of the replicate stream
    stats : ndarray
        Ascending statistics, length ``B``
    direction : Direction
        Tail in which the statistic is significant

    """

    method: MethodSpec
    K: int
    B: int
    seed: int
    stats: np.ndarray
    direction: Direction

    def __post_init__(self) -> None:
        stats = np.array(self.stats, dtype=np.float64)
        if stats.ndim != 1 or stats.size != self.B:
            raise UsageError(f'table holds {stats.size} values but B={self.B}')
        if stats.size > 1 and (np.diff(stats) < 0).any():
            stats = np.sort(stats, kind='stable')
        stats.setflags(write=False)
        object.__setattr__(self, 'stats', stats)
        object.__setattr__(self, 'direction', Direction(self.direction))

    @property
    def key(self) -> Tuple[str, int, int, int]:
        return (self.method.key, self.K, self.B, self.seed)

    def __repr__(self) -> str:
        return 'NullTable(method=%s, K=%d, B=%d, seed=%d, direction=%s)' % (
            self.method.key, self.K, self.B, self.seed, self.direction.value,
        )


def _spec(method: Union[MethodSpec, Method, str]) -> MethodSpec:
    if isinstance(method, MethodSpec):
        return method
    if isinstance(method, str):
        return parse_method_spec(method)
    return MethodSpec(method)


def analytic_pvalue(
    method: Union[MethodSpec, Method, str],
    stat: Union[float, np.ndarray],
    K: int,
) -> Union[float, np.ndarray]:
    """
    Closed-form null p-value of a statistic.

    Only Fisher, Stouffer, MinP and Cauchy have one.

    """
    spec = _spec(method)
    x = np.asarray(stat, dtype=np.float64)
    if spec.method is Method.FISHER:
        out = chi2_sf(np.maximum(x, 0.0), 2 * K)
    elif spec.method is Method.STOUFFER:
        out = norm_sf(x / math.sqrt(K))
    elif spec.method is Method.MINP:
        out = -np.expm1(K * np.log1p(-np.clip(x, 0.0, 1.0)))
    elif spec.method is Method.CAUCHY:
        out = cauchy_sf(x)
    else:
        raise UsageError(f'{spec.method} has no analytic null distribution')
    out = np.clip(np.asarray(out, dtype=np.float64), 0.0, 1.0)
    if np.ndim(stat) == 0:
        return float(out)
    return out


def build_null_table(
    method: Union[MethodSpec, Method, str],
    K: int,
    B: int = DEFAULT_B,
    seed: int = DEFAULT_TABLE_SEED,
    threads: Optional[int] = None,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
    statistic: Optional[StatisticFn] = None,
    stream: int = Stream.TABLE,
) -> NullTable:
    """
    Simulate the null distribution of a statistic.

    Replicate ``r`` uses row ``r`` of the counter-based stream keyed by
    ``(seed, stream)``, so the result does not depend on ``threads``.

    Parameters
    ----------
    method : MethodSpec
        The method whose statistic is tabulated
    K : int
        Number of p-values per replicate
    B : int, optional
        Number of replicates (at least 1000)
    seed : int, optional
        Stream seed
    threads : int, optional
        Worker threads
    memory_budget : int, optional
        Largest ``B * K`` allowed
    statistic : callable, optional
        Maps an ``(n, K)`` matrix of uniform p-values to ``n`` statistics;
        defaults to the method's own statistic
    stream : int, optional
        Random stream identifier

    Returns
    -------
    NullTable

    """
    spec = _spec(method)
    if K < 1:
        raise UsageError(f'K must be positive: {K}')
    if B < MIN_TABLE_SIZE:
        raise UsageError(f'table size B must be at least {MIN_TABLE_SIZE}: {B}')
    if B * K > memory_budget:
        raise ResourceGuardError(
            f'B*K = {B * K} exceeds the memory budget of {memory_budget} cells',
        )

    fn: StatisticFn
    if statistic is not None:
        fn = statistic
    else:
        fn = lambda p: np.asarray(combiners.statistic(spec, p))  # noqa: E731

    def block(start: int, stop: int) -> np.ndarray:
        return fn(uniform_rows(seed, stream, start, stop, K))

    t0 = time.perf_counter()
    stats = np.concatenate(map_blocks(block, B, threads))
    stats.sort(kind='stable')
    logger.info(
        'built null table %s K=%d B=%d seed=%d in %.2fs',
        spec.key, K, B, seed, time.perf_counter() - t0,
    )
    return NullTable(
        method=spec, K=K, B=B, seed=seed, stats=stats, direction=spec.direction,
    )


def mc_pvalue(
    stat: Union[float, np.ndarray],
    table: NullTable,
) -> Union[float, np.ndarray]:
    """
    Monte Carlo p-value ``(1 + #{at least as extreme}) / (B + 1)``.

    Ties with table entries count as at least as extreme.

    """
    x = np.asarray(stat, dtype=np.float64)
    if table.direction is Direction.LARGE:
        count = table.B - np.searchsorted(table.stats, x, side='left')
    else:
        count = np.searchsorted(table.stats, x, side='right')
    out = (1.0 + count) / (table.B + 1.0)
    if np.ndim(stat) == 0:
        return float(out)
    return out


def critical_value(
    table: NullTable,
    alpha: float,
    min_tail: int = MIN_TAIL_COUNT,
) -> float:
    """
    Empirical critical value at level ``alpha``.

    Uses the ceiling-rank convention: the ``ceil((1 - alpha) B)``-th smallest
    statistic when large values are significant, the ``ceil(alpha B)``-th
    otherwise.

    Raises
    ------
    UsageError
        If alpha is outside (0, 0.5]
    ResourceGuardError
        If fewer than ``min_tail`` table entries lie beyond the critical value

    """
    if not 0.0 < alpha <= 0.5:
        raise UsageError(f'alpha must be in (0, 0.5]: {alpha}')
    if table.B * alpha < min_tail:
        raise ResourceGuardError(
            f'B*alpha = {table.B * alpha:g} < {min_tail}; the table tail is unstable',
        )
    if table.direction is Direction.LARGE:
        rank = math.ceil(round((1.0 - alpha) * table.B, 9))
    else:
        rank = math.ceil(round(alpha * table.B, 9))
    rank = min(max(rank, 1), table.B)
    return float(table.stats[rank - 1])


def rejects(
    stat: Union[float, np.ndarray],
    crit: float,
    direction: Direction,
) -> Union[bool, np.ndarray]:
    """Direction-aware comparison of statistics against a critical value."""
    x = np.asarray(stat, dtype=np.float64)
    out = x >= crit if direction is Direction.LARGE else x <= crit
    if np.ndim(stat) == 0:
        return bool(out)
    return out


def _omnibus_base(variant: Union[str, Method]) -> Method:
    name = variant.value if isinstance(variant, Method) else str(variant).lower()
    if name in ('hard', Method.OTFHARD.value, Method.TFHARD.value):
        return Method.TFHARD
    if name in ('soft', Method.OTFSOFT.value, Method.TFSOFT.value):
        return Method.TFSOFT
    raise UsageError(f'unknown omnibus variant: {variant!r}')


def _check_omnibus_tables(
    base: Method,
    tau_set: Sequence[float],
    tables: Sequence[NullTable],
) -> None:
    if len(tables) != len(tau_set):
        raise UsageError(
            f'{len(tables)} tables supplied for {len(tau_set)} truncation levels',
        )
    for tau, table in zip(tau_set, tables):
        if table.method.method is not base or table.method.tau != float(tau):
            raise UsageError(
                f'table {table.method.key} does not match {base.value}(tau={tau})',
            )
    if len({t.B for t in tables}) > 1 or len({t.K for t in tables}) > 1:
        raise UsageError('omnibus tables must share K and B')


def omnibus_tf_statistic(
    variant: Union[str, Method],
    p: Any,
    tau_set: Sequence[float],
    tables: Sequence[NullTable],
) -> Union[float, np.ndarray]:
    """Minimum over the truncation levels of the per-level Monte Carlo p-values."""
    base = _omnibus_base(variant)
    _check_omnibus_tables(base, tau_set, tables)
    arr, single = combiners._as_matrix(p)
    stat_fn = combiners.tfhard_stat if base is Method.TFHARD else combiners.tfsoft_stat
    out = np.full(arr.shape[0], np.inf)
    for tau, table in zip(tau_set, tables):
        out = np.minimum(out, mc_pvalue(np.asarray(stat_fn(arr, tau)), table))
    if single:
        return float(out[0])
    return out


def build_omnibus_tables(
    spec: MethodSpec,
    K: int,
    B: int = DEFAULT_B,
    seed: int = DEFAULT_TABLE_SEED,
    threads: Optional[int] = None,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
    table_factory: Optional[TableFactory] = None,
) -> Tuple[List[NullTable], NullTable]:
    """
    Build the per-level tables and the min-statistic table of an omnibus test.

    The min-statistic table draws its replicates from a separate stream so
    that it is independent of the per-level tables it is computed against.

    """
    if spec.method not in OMNIBUS_METHODS:
        raise UsageError(f'{spec.method} is not an omnibus test')
    base = _omnibus_base(spec.method)

    def default_factory(s: MethodSpec, k: int) -> NullTable:
        return build_null_table(
            s, k, B=B, seed=seed, threads=threads, memory_budget=memory_budget,
        )

    factory = table_factory or default_factory
    tables = [factory(MethodSpec(base, tau=tau), K) for tau in spec.tau_set]
    minstat = build_null_table(
        spec, K, B=B, seed=seed, threads=threads, memory_budget=memory_budget,
        statistic=lambda p: np.asarray(
            omnibus_tf_statistic(base, p, spec.tau_set, tables),
        ),
        stream=Stream.OMNIBUS,
    )
    return tables, minstat


def omnibus_tf_pvalue(
    variant: Union[str, Method],
    p: Union[PValueVector, Sequence[float]],
    tau_set: Sequence[float],
    tables: Sequence[NullTable],
    minstat_table: NullTable,
) -> CombineResult:
    """
    Omnibus truncated-Fisher p-value, calibrated by a second Monte Carlo layer.

    Parameters
    ----------
    variant : {'hard', 'soft'}
        Thresholding variant
    p : PValueVector
        The p-values
    tau_set : sequence of floats
        Truncation levels
    tables : sequence of NullTables
        One table per level, in the order of ``tau_set``
    minstat_table : NullTable
        Null table of the min-over-levels statistic

    Returns
    -------
    CombineResult

    """
    if minstat_table.direction is not Direction.SMALL:
        raise UsageError('the min-statistic table must be SmallIsSignificant')
    vec = validate(p)
    if vec.K != minstat_table.K:
        raise UsageError(f'table built for K={minstat_table.K}, got K={vec.K}')
    stat = float(omnibus_tf_statistic(variant, vec.array, tau_set, tables))
    return CombineResult(
        statistic=stat,
        pvalue=float(mc_pvalue(stat, minstat_table)),
        calibration=Calibration.MONTE_CARLO,
        method=minstat_table.method.key,
        id=vec.id,
        clamped=vec.clamped,
    )
