#!/usr/bin/env python
"""Combiners: a method bound to K and to its null calibration."""
from __future__ import annotations

import math
import threading
from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple
from typing import Union

import numpy as np
from scipy import stats as sps
from sqlalchemy import log
from sqlalchemy import util

from . import combiners
from .cache import NullTableCache
from .core import ANALYTIC_METHODS
from .core import Calibration
from .core import CAUCHY_APPROX_METHODS
from .core import CLAMP_FLOOR
from .core import CombineResult
from .core import DEFAULT_B
from .core import DEFAULT_TABLE_SEED
from .core import Direction
from .core import Method
from .core import MethodSpec
from .core import OMNIBUS_METHODS
from .core import parse_method_spec
from .core import PValueVector
from .core import validate
from .core import validate_matrix
from .ensemble import ensemble_stat
from .ensemble import pearson_stat
from .exceptions import UsageError
from .nulldist import analytic_pvalue
from .nulldist import build_null_table
from .nulldist import critical_value as table_critical_value
from .nulldist import mc_pvalue
from .nulldist import NullTable
from .nulldist import omnibus_tf_statistic
from .rng import Stream
from .special import cauchy_isf
from .special import cauchy_sf

CALIBRATE_OPTIONS = ('auto', 'mc')


def _table_stream(spec: MethodSpec) -> int:
    if spec.method in OMNIBUS_METHODS:
        return Stream.OMNIBUS
    if spec.method in (Method.FE, Method.FECS):
        return Stream.ENSEMBLE
    if spec.method is Method.PEARSON:
        return Stream.PEARSON
    return Stream.TABLE


@log.class_logger
class Combiner(object):
    """
    A combination method for vectors of K p-values.

    Analytic methods use their closed-form nulls; FE, FE_CS and the truncated
    Cauchy method use the standard Cauchy approximation; everything else is
    calibrated by a Monte Carlo table loaded lazily from ``cache``.

    Parameters
    ----------
    method : MethodSpec or str
        Method, e.g. ``'afp'`` or ``'tfhard(tau=0.05)'``
    K : int
        Number of p-values per vector
    B : int, optional
        Monte Carlo table size
    seed : int, optional
        Table seed
    cache : NullTableCache, optional
        Table cache; an in-memory cache is created when omitted
    threads : int, optional
        Worker threads for table builds
    calibrate : {'auto', 'mc'}, optional
        ``'mc'`` forces Monte Carlo calibration for every method
    pool : CombinerPool, optional
        Pool used to share constituent combiners

    """

    logger: Any

    def __init__(
        self,
        method: Union[MethodSpec, str],
        K: int,
        B: int = DEFAULT_B,
        seed: int = DEFAULT_TABLE_SEED,
        cache: Optional[NullTableCache] = None,
        threads: Optional[int] = None,
        calibrate: str = 'auto',
        pool: Optional['CombinerPool'] = None,
    ) -> None:
        self.spec = parse_method_spec(method)
        if K < 1:
            raise UsageError(f'K must be positive: {K}')
        if calibrate not in CALIBRATE_OPTIONS:
            raise UsageError(
                f'calibrate must be one of {CALIBRATE_OPTIONS}: {calibrate!r}',
            )
        self.K = int(K)
        self.B = int(B)
        self.seed = int(seed)
        self.threads = threads
        self.calibrate = calibrate
        self.cache = cache if cache is not None else NullTableCache(threads=threads)
        self.pool = pool

    def __repr__(self) -> str:
        return 'Combiner(%s, K=%d, calibration=%s)' % (
            self.spec.key, self.K, self.calibration.value,
        )

    @property
    def method(self) -> Method:
        return self.spec.method

    @property
    def direction(self) -> Direction:
        return self.spec.direction

    @property
    def calibration(self) -> Calibration:
        if self.calibrate == 'mc':
            return Calibration.MONTE_CARLO
        if self.method in ANALYTIC_METHODS:
            return Calibration.ANALYTIC
        if self.method in CAUCHY_APPROX_METHODS:
            return Calibration.CAUCHY_APPROX
        return Calibration.MONTE_CARLO

    def _sub(self, spec: MethodSpec) -> 'Combiner':
        if self.pool is not None:
            return self.pool.get(spec, self.K, calibrate='auto')
        return Combiner(
            spec, self.K, B=self.B, seed=self.seed, cache=self.cache,
            threads=self.threads,
        )

    @util.memoized_property
    def constituents(self) -> List['Combiner']:
        """Constituent combiners of an ensemble method."""
        if self.method not in (Method.FE, Method.FECS):
            return []
        return [self._sub(MethodSpec(m)) for m in self.spec.constituents]

    @util.memoized_property
    def omnibus_tables(self) -> List[NullTable]:
        """Per-level tables of an omnibus test."""
        if self.method not in OMNIBUS_METHODS:
            return []
        base = Method.TFHARD if self.method is Method.OTFHARD else Method.TFSOFT
        return [
            self._sub(MethodSpec(base, tau=tau)).table for tau in self.spec.tau_set
        ]

    def _prime_dependencies(self) -> None:
        # Load tables of constituents before a parallel build needs them
        for sub in self.constituents:
            if sub.calibration is Calibration.MONTE_CARLO:
                sub.table
        self.omnibus_tables

    @util.memoized_property
    def table(self) -> NullTable:
        """Monte Carlo null table of this combiner's statistic."""
        spec = self.spec
        self._prime_dependencies()

        def build() -> NullTable:
            return build_null_table(
                spec, self.K, B=self.B, seed=self.seed, threads=self.threads,
                memory_budget=self.cache.memory_budget,
                statistic=self._null_statistics,
                stream=_table_stream(spec),
            )

        return self.cache.get_or_build(spec, self.K, self.B, self.seed, build=build)

    def _null_statistics(self, p: np.ndarray) -> np.ndarray:
        return self._statistics(p, None)

    def _statistics(self, p: np.ndarray, left: Optional[np.ndarray]) -> np.ndarray:
        method = self.method
        if self.spec.is_one_sided:
            lp = p if left is None else left
            rp = np.clip(1.0 - lp, CLAMP_FLOOR, 1.0)
            if method is Method.PEARSON:
                return np.asarray(pearson_stat(lp, rp))
            parts = []
            for sub in self.constituents:
                parts.append(sub._pvalues(lp, None))
                parts.append(sub._pvalues(rp, None))
            return np.asarray(ensemble_stat(np.stack(parts, axis=-1), self.spec.delta))
        if method is Method.FE:
            parts = [sub._pvalues(p, None) for sub in self.constituents]
            return np.asarray(ensemble_stat(np.stack(parts, axis=-1), self.spec.delta))
        if method in OMNIBUS_METHODS:
            return np.asarray(
                omnibus_tf_statistic(method, p, self.spec.tau_set, self.omnibus_tables),
            )
        return np.asarray(combiners.statistic(self.spec, p))

    def _pvalues_from_stats(self, stats: np.ndarray) -> np.ndarray:
        calibration = self.calibration
        if calibration is Calibration.ANALYTIC:
            return np.asarray(analytic_pvalue(self.spec, stats, self.K))
        if calibration is Calibration.CAUCHY_APPROX:
            return np.asarray(cauchy_sf(stats))
        return np.asarray(mc_pvalue(stats, self.table))

    def _pvalues(self, p: np.ndarray, left: Optional[np.ndarray]) -> np.ndarray:
        return self._pvalues_from_stats(self._statistics(p, left))

    def _prepare(
        self,
        p: Any,
        left: Optional[Any],
    ) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        arr = validate_matrix(p)
        if arr.shape[1] != self.K:
            raise UsageError(
                f'{self.spec.key} was set up for K={self.K}, got {arr.shape[1]}',
            )
        lp = None
        if left is not None:
            lp = validate_matrix(left)
            if lp.shape != arr.shape:
                raise UsageError('left one-sided p-values must match the p-value shape')
        return arr, lp

    def statistics(self, p: Any, left: Optional[Any] = None) -> np.ndarray:
        """
        Statistics for each row of ``p``.

        For FE_CS and Pearson, ``left`` holds the left one-sided p-values
        (right ones are ``1 - left``); when it is omitted ``p`` itself is
        read as the left one-sided p-values.

        """
        arr, lp = self._prepare(p, left)
        return self._statistics(arr, lp)

    def pvalues(self, p: Any, left: Optional[Any] = None) -> np.ndarray:
        """Combined p-values for each row of ``p``."""
        arr, lp = self._prepare(p, left)
        return self._pvalues(arr, lp)

    def combine(
        self,
        p: Union[PValueVector, Any],
        left: Optional[Any] = None,
    ) -> CombineResult:
        """Combine a single p-value vector."""
        vec = validate(p)
        arr, lp = self._prepare(vec.array, left)
        stat = self._statistics(arr, lp)
        pval = float(np.clip(self._pvalues_from_stats(stat)[0], 0.0, 1.0))

        j_star: Optional[int] = None
        weights: Optional[Tuple[int, ...]] = None
        if self.method is Method.AFP:
            _, j_star, trace = combiners.afp_stat(vec.array)
            weights = combiners.afp_selected_weights(trace, j_star)
        elif self.method is Method.AFZ:
            _, j_star = combiners.afz_stat(vec.array)
            trace = combiners.afz_trace(vec.array)
            weights = combiners.afp_selected_weights(trace, j_star)

        return CombineResult(
            statistic=float(stat[0]),
            pvalue=pval,
            calibration=self.calibration,
            selected_weights=weights,
            j_star=j_star,
            method=self.spec.key,
            id=vec.id,
            clamped=vec.clamped,
        )

    def critical_value(self, alpha: float) -> float:
        """
        Direction-aware critical value at level ``alpha``.

        A statistic rejects when it is at least as extreme as this value.

        """
        calibration = self.calibration
        if not 0.0 < alpha < 1.0:
            raise UsageError(f'alpha must be in (0, 1): {alpha}')
        if calibration is Calibration.CAUCHY_APPROX:
            return float(cauchy_isf(alpha))
        if calibration is Calibration.ANALYTIC:
            if self.method is Method.FISHER:
                return float(sps.chi2.isf(alpha, 2 * self.K))
            if self.method is Method.STOUFFER:
                return float(math.sqrt(self.K) * sps.norm.isf(alpha))
            if self.method is Method.MINP:
                return float(-math.expm1(math.log1p(-alpha) / self.K))
            return float(cauchy_isf(alpha))
        return table_critical_value(self.table, alpha)

    def rejects(self, p: Any, alpha: float, left: Optional[Any] = None) -> np.ndarray:
        """Rows of ``p`` whose combined p-value is at most ``alpha``."""
        return self.pvalues(p, left) <= alpha


@log.class_logger
class CombinerPool(object):
    """
    Memoized combiners sharing one table cache.

    Parameters
    ----------
    B : int, optional
        Monte Carlo table size
    seed : int, optional
        Table seed
    cache : NullTableCache, optional
        Shared table cache
    threads : int, optional
        Worker threads for table builds
    calibrate : {'auto', 'mc'}, optional
        Calibration mode of combiners requested from this pool

    """

    logger: Any

    def __init__(
        self,
        B: int = DEFAULT_B,
        seed: int = DEFAULT_TABLE_SEED,
        cache: Optional[NullTableCache] = None,
        threads: Optional[int] = None,
        calibrate: str = 'auto',
    ) -> None:
        self.B = B
        self.seed = seed
        self.threads = threads
        self.calibrate = calibrate
        self.cache = cache if cache is not None else NullTableCache(threads=threads)
        self._combiners: Dict[Tuple[str, int, str], Combiner] = {}
        self._lock = threading.RLock()

    def get(
        self,
        method: Union[MethodSpec, str],
        K: int,
        calibrate: Optional[str] = None,
    ) -> Combiner:
        """Return the combiner for ``(method, K)``, creating it on first use."""
        spec = parse_method_spec(method)
        mode = calibrate or self.calibrate
        key = (spec.key, int(K), mode)
        with self._lock:
            combiner = self._combiners.get(key)
            if combiner is None:
                combiner = Combiner(
                    spec, K, B=self.B, seed=self.seed, cache=self.cache,
                    threads=self.threads, calibrate=mode, pool=self,
                )
                self._combiners[key] = combiner
                self.logger.debug('created %r', combiner)
            return combiner

    def keys(self) -> List[Tuple[str, int, str]]:
        with self._lock:
            return sorted(self._combiners)
