#!/usr/bin/env python
"""
Combination statistics.

Every statistic accepts a single p-value vector (returning a float) or a
matrix of shape ``(n, K)`` with one vector per row (returning an array of
length ``n``). Inputs are expected to be validated; zeros should already be
clamped (see :func:`pcombine.core.validate`).

"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any
from typing import Callable
from typing import Dict
from typing import Tuple
from typing import Union

import numpy as np
from scipy import special

from .core import CLAMP_FLOOR
from .core import Method
from .core import MethodSpec
from .core import PValueVector
from .exceptions import UsageError
from .special import chi2_logsf
from .special import norm_isf

PInput = Union[PValueVector, np.ndarray, Any]
Stat = Union[float, np.ndarray]


def _as_matrix(p: PInput) -> Tuple[np.ndarray, bool]:
    if isinstance(p, PValueVector):
        p = p.values
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim != 2:
        raise UsageError('p-values must be a vector or an (n, K) matrix')
    return arr, False


def _out(values: np.ndarray, single: bool) -> Stat:
    if single:
        return float(values[0])
    return values


def _sorted(p: np.ndarray) -> np.ndarray:
    return np.sort(p, axis=-1, kind='stable')


@dataclass(frozen=True)
class PartialSumTrace:
    """
    Order statistics and the per-j objective of an adaptive statistic.

    ``order[i]`` is the original position of ``ordered_p[i]``; ties keep
    their input order.

    """

    ordered_p: Tuple[float, ...]
    order: Tuple[int, ...]
    partial_stats: Tuple[float, ...]

    @property
    def K(self) -> int:
        return len(self.ordered_p)


def _trace(row: np.ndarray, obj: np.ndarray) -> PartialSumTrace:
    order = np.argsort(row, kind='stable')
    return PartialSumTrace(
        ordered_p=tuple(float(x) for x in row[order]),
        order=tuple(int(x) for x in order),
        partial_stats=tuple(float(x) for x in obj),
    )


def fisher_stat(p: PInput) -> Stat:
    """Fisher's statistic ``sum(-2 log p)``."""
    arr, single = _as_matrix(p)
    return _out(-2.0 * np.log(arr).sum(axis=-1), single)


def stouffer_stat(p: PInput, floor: float = CLAMP_FLOOR) -> Stat:
    """Stouffer's statistic ``sum(Phi^-1(1 - p))``."""
    arr, single = _as_matrix(p)
    z = norm_isf(np.clip(arr, floor, 1.0 - floor))
    return _out(np.asarray(z).sum(axis=-1), single)


def minp_stat(p: PInput) -> Stat:
    arr, single = _as_matrix(p)
    return _out(arr.min(axis=-1), single)


def afp_objective(p: PInput) -> np.ndarray:
    """
    Per-j AFp objective on sorted p-values, shape ``(n, K)``.

    Column ``j - 1`` holds ``-log SF_chi2(2j)(-2 sum_{i<=j} log p_(i))``; the
    first column is exactly ``-log p_(1)``.

    """
    arr, _ = _as_matrix(p)
    return afp_objective_from_logs(np.log(_sorted(arr)))


def afp_objective_from_logs(log_sorted: np.ndarray) -> np.ndarray:
    """AFp objective from ascending log p-values (may be far below float range)."""
    log_sorted = np.atleast_2d(log_sorted)
    cum = -2.0 * np.cumsum(log_sorted, axis=-1)
    cum = np.maximum(cum, 0.0)
    df = 2.0 * np.arange(1, log_sorted.shape[-1] + 1)
    obj = -np.asarray(chi2_logsf(cum, df))
    obj[:, 0] = -log_sorted[:, 0]
    return obj


def afp_stats(p: PInput) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized AFp statistic and maximizing index ``j*`` (1-based)."""
    obj = afp_objective(p)
    j = np.argmax(obj, axis=-1)
    return obj[np.arange(obj.shape[0]), j], j + 1


def afp_stat(p: PInput) -> Tuple[float, int, PartialSumTrace]:
    """
    Adaptively weighted Fisher statistic of a single vector.

    Returns
    -------
    (statistic, j_star, trace)
        ``j_star`` is the smallest maximizing index

    """
    arr, single = _as_matrix(p)
    if not single:
        raise UsageError('afp_stat takes one p-value vector; use afp_stats for matrices')
    trace = _trace(arr[0], afp_objective(arr)[0])
    j = int(np.argmax(trace.partial_stats))
    return trace.partial_stats[j], j + 1, trace


def afp_selected_weights(trace: PartialSumTrace, j_star: int) -> Tuple[int, ...]:
    """Indicator of the ``j_star`` smallest p-values in original positions."""
    if not 1 <= j_star <= trace.K:
        raise UsageError(f'j_star must be in 1..{trace.K}: {j_star}')
    w = [0] * trace.K
    for idx in trace.order[:j_star]:
        w[idx] = 1
    return tuple(w)


def selected_weights_matrix(p: np.ndarray, j_star: np.ndarray) -> np.ndarray:
    """Row-wise version of :func:`afp_selected_weights`."""
    arr, _ = _as_matrix(p)
    order = np.argsort(arr, axis=-1, kind='stable')
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(arr.shape[1])[None, :], axis=-1)
    return (ranks < np.asarray(j_star)[:, None]).astype(np.int8)


def afz_weights(K: int) -> Tuple[np.ndarray, np.ndarray]:
    """Centering ``A_j`` and scaling ``B_j`` for j = 1..K."""
    i = np.arange(1, K + 1, dtype=np.float64)
    j = i[:, None]
    w = np.minimum(1.0, j / i[None, :])
    return w.sum(axis=1), np.sqrt((w ** 2).sum(axis=1))


def afz_objective(p: PInput) -> np.ndarray:
    """Per-j standardized partial sums on sorted p-values, shape ``(n, K)``."""
    arr, _ = _as_matrix(p)
    A, B = afz_weights(arr.shape[1])
    partial = -np.cumsum(np.log(_sorted(arr)), axis=-1)
    return (partial - A[None, :]) / B[None, :]


def afz_stats(p: PInput) -> Tuple[np.ndarray, np.ndarray]:
    obj = afz_objective(p)
    j = np.argmax(obj, axis=-1)
    return obj[np.arange(obj.shape[0]), j], j + 1


def afz_stat(p: PInput) -> Tuple[float, int]:
    """z-standardized adaptive Fisher statistic and its maximizing index."""
    arr, single = _as_matrix(p)
    if not single:
        raise UsageError('afz_stat takes one p-value vector; use afz_stats for matrices')
    stat, j = afz_stats(arr)
    return float(stat[0]), int(j[0])


def afz_trace(p: PInput) -> PartialSumTrace:
    """Per-j AFz objective of a single vector, for selected weights."""
    arr, single = _as_matrix(p)
    if not single:
        raise UsageError('afz_trace takes one p-value vector')
    return _trace(arr[0], afz_objective(arr)[0])


def tfhard_stat(p: PInput, tau: float) -> Stat:
    """Truncated Fisher with hard thresholding at ``tau``."""
    arr, single = _as_matrix(p)
    terms = np.where(arr <= tau, -2.0 * np.log(arr), 0.0)
    return _out(terms.sum(axis=-1), single)


def tfsoft_stat(p: PInput, tau: float) -> Stat:
    """Truncated Fisher with soft thresholding at ``tau``."""
    arr, single = _as_matrix(p)
    terms = np.maximum(-2.0 * np.log(arr) + 2.0 * np.log(tau), 0.0)
    return _out(terms.sum(axis=-1), single)


def cauchy_transform(p: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """``tan(pi * (1/2 - p))``, evaluated as ``cot(pi p)`` for small p."""
    pa = np.asarray(p, dtype=np.float64)
    with np.errstate(divide='ignore'):
        small = 1.0 / np.tan(np.pi * pa)
    out = np.where(pa < 0.25, small, np.tan(np.pi * (0.5 - pa)))
    if np.ndim(p) == 0:
        return float(out)
    return out


def trunc_cauchy_transform(
    p: Union[float, np.ndarray],
    delta: float,
) -> Union[float, np.ndarray]:
    """Cauchy transform with p-values above ``1 - delta`` pinned to ``1 - delta``."""
    if not 0.0 < delta < 1.0:
        raise UsageError(f'delta must be in (0, 1): {delta}')
    return cauchy_transform(np.minimum(p, 1.0 - delta))


def pareto_rv_transform(
    p: Union[float, np.ndarray],
    gamma: float,
) -> Union[float, np.ndarray]:
    """Upper ``p``-quantile of the Pareto distribution with tail index ``gamma``."""
    if not gamma > 0.0:
        raise UsageError(f'gamma must be positive: {gamma}')
    pa = np.asarray(p, dtype=np.float64)
    out = pa ** (-1.0 / gamma)
    if np.ndim(p) == 0:
        return float(out)
    return out


def cauchy_stat(p: PInput, floor: float = CLAMP_FLOOR) -> Stat:
    arr, single = _as_matrix(p)
    h = cauchy_transform(np.clip(arr, floor, 1.0 - floor))
    return _out(np.asarray(h).mean(axis=-1), single)


def trunc_cauchy_stat(p: PInput, delta: float) -> Stat:
    arr, single = _as_matrix(p)
    return _out(np.asarray(trunc_cauchy_transform(arr, delta)).mean(axis=-1), single)


def harmonic_mean_stat(p: PInput) -> Stat:
    """Equal-weight harmonic mean of the p-values."""
    arr, single = _as_matrix(p)
    return _out(arr.shape[1] / (1.0 / arr).sum(axis=-1), single)


def pareto_rv_stat(p: PInput, gamma: float) -> Stat:
    arr, single = _as_matrix(p)
    return _out(np.asarray(pareto_rv_transform(arr, gamma)).sum(axis=-1), single)


def hc_stat(p: PInput) -> Stat:
    """
    Higher criticism over all order statistics.

    Terms whose order statistic is exactly 0 or 1 are skipped; if nothing is
    left the statistic is ``-inf``.

    """
    arr, single = _as_matrix(p)
    K = arr.shape[1]
    ps = _sorted(arr)
    frac = np.arange(1, K + 1, dtype=np.float64) / K
    valid = (ps > 0.0) & (ps < 1.0)
    safe = np.where(valid, ps, 0.5)
    terms = np.sqrt(K) * (frac[None, :] - safe) / np.sqrt(safe * (1.0 - safe))
    terms = np.where(valid, terms, -np.inf)
    return _out(terms.max(axis=-1), single)


def bj_stat(p: PInput) -> Stat:
    """One-sided Berk-Jones statistic; 0 when no order statistic lies below i/K."""
    arr, single = _as_matrix(p)
    K = arr.shape[1]
    ps = _sorted(arr)
    a = np.broadcast_to(np.arange(1, K + 1, dtype=np.float64) / K, ps.shape)
    kl = special.rel_entr(a, ps) + special.rel_entr(1.0 - a, 1.0 - ps)
    terms = np.where(ps < a, K * kl, 0.0)
    return _out(np.maximum(terms.max(axis=-1), 0.0), single)


SIMPLE_STATISTICS: Dict[Method, Callable[[MethodSpec, np.ndarray], np.ndarray]] = {
    Method.FISHER: lambda s, p: fisher_stat(p),
    Method.STOUFFER: lambda s, p: stouffer_stat(p),
    Method.MINP: lambda s, p: minp_stat(p),
    Method.AFP: lambda s, p: afp_stats(p)[0],
    Method.AFZ: lambda s, p: afz_stats(p)[0],
    Method.TFHARD: lambda s, p: tfhard_stat(p, s.tau),
    Method.TFSOFT: lambda s, p: tfsoft_stat(p, s.tau),
    Method.CAUCHY: lambda s, p: cauchy_stat(p),
    Method.TRUNC_CAUCHY: lambda s, p: trunc_cauchy_stat(p, s.delta),
    Method.HARMONIC_MEAN: lambda s, p: harmonic_mean_stat(p),
    Method.PARETO_RV: lambda s, p: pareto_rv_stat(p, s.gamma),
    Method.HC: lambda s, p: hc_stat(p),
    Method.BJ: lambda s, p: bj_stat(p),
}


def statistic(spec: MethodSpec, p: PInput) -> Stat:
    """
    Evaluate the statistic of a non-composite method.

    Omnibus, ensemble and Pearson statistics depend on calibration tables
    or one-sided inputs; use :class:`pcombine.base.Combiner` for those.

    """
    fn = SIMPLE_STATISTICS.get(spec.method)
    if fn is None:
        raise UsageError(
            f'{spec.method} is a composite method; use pcombine.Combiner',
        )
    arr, single = _as_matrix(p)
    return _out(np.asarray(fn(spec, arr), dtype=np.float64), single)
