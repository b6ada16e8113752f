#!/usr/bin/env python
"""Fisher ensembles, the Pearson test, and regularly-varying ensembles."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np

from .combiners import pareto_rv_transform
from .combiners import trunc_cauchy_transform
from .core import CLAMP_FLOOR
from .core import DEFAULT_DELTA
from .core import Method
from .exceptions import DataError
from .exceptions import UsageError
from .nulldist import analytic_pvalue
from .special import cauchy_sf

Real = Union[float, np.ndarray]

#: Tolerance on ``p_left + p_right == 1``
ONE_SIDED_TOLERANCE = 1e-9


def _result(value: np.ndarray, *inputs: Real) -> Real:
    if all(np.ndim(x) == 0 for x in inputs):
        return float(value)
    return value


def _h(p: Real, delta: float) -> np.ndarray:
    pa = np.asarray(p, dtype=np.float64)
    if np.isnan(pa).any() or ((pa < 0) | (pa > 1)).any():
        raise DataError('ensemble inputs must be p-values in [0, 1]')
    pa = np.clip(pa, CLAMP_FLOOR, 1.0)
    return np.asarray(trunc_cauchy_transform(pa, delta))


@dataclass(frozen=True)
class EnsembleInput:
    """Constituent p-values of one ensemble evaluation."""

    component_pvalues: Tuple[float, ...]
    delta: float = DEFAULT_DELTA
    labels: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if len(self.component_pvalues) < 2:
            raise UsageError('an ensemble needs at least two constituent p-values')
        if self.labels and len(self.labels) != len(self.component_pvalues):
            raise UsageError('one label per constituent p-value is required')

    @property
    def L(self) -> int:
        return len(self.component_pvalues)

    def statistic(self) -> float:
        return float(ensemble_stat(np.asarray(self.component_pvalues), self.delta))

    def pvalue(self) -> float:
        return float(cauchy_sf(self.statistic()))


def ensemble_stat(component_pvalues: np.ndarray, delta: float = DEFAULT_DELTA) -> Real:
    """Average truncated Cauchy transform over the last axis."""
    arr = np.asarray(component_pvalues, dtype=np.float64)
    out = _h(arr, delta).mean(axis=-1)
    if arr.ndim == 1:
        return float(out)
    return out


def fe_stat(p_fisher: Real, p_afp: Real, delta: float = DEFAULT_DELTA) -> Real:
    """Fisher ensemble statistic ``[h_delta(p_fisher) + h_delta(p_afp)] / 2``."""
    out = (_h(p_fisher, delta) + _h(p_afp, delta)) / 2.0
    return _result(out, p_fisher, p_afp)


def fe_pvalue(stat: Real) -> Real:
    """Standard Cauchy survival function at the ensemble statistic."""
    return cauchy_sf(stat)


def fecs_stat(
    p_fisher_left: Real,
    p_fisher_right: Real,
    p_afp_left: Real,
    p_afp_right: Real,
    delta: float = DEFAULT_DELTA,
) -> Real:
    """Concordant-signal Fisher ensemble over the four one-sided p-values."""
    out = (
        _h(p_fisher_left, delta) + _h(p_fisher_right, delta)
        + _h(p_afp_left, delta) + _h(p_afp_right, delta)
    ) / 4.0
    return _result(out, p_fisher_left, p_fisher_right, p_afp_left, p_afp_right)


def fecs_pvalue(stat: Real) -> Real:
    return cauchy_sf(stat)


def size_inflation_bound(L: int, delta: float = DEFAULT_DELTA) -> float:
    """Upper bound on true size divided by nominal size for an L-term ensemble."""
    return float((1.0 + delta) ** L)


def check_one_sided(
    p_left: np.ndarray,
    p_right: np.ndarray,
    tol: float = ONE_SIDED_TOLERANCE,
) -> None:
    """Raise :class:`DataError` unless ``p_left + p_right == 1`` within ``tol``."""
    gap = np.abs(np.asarray(p_left) + np.asarray(p_right) - 1.0)
    if (gap > tol).any():
        raise DataError(
            f'one-sided p-values must sum to 1; largest deviation {gap.max():g}',
        )


def pearson_stat(
    p_left: Union[Sequence[float], np.ndarray],
    p_right: Union[Sequence[float], np.ndarray],
    tol: float = ONE_SIDED_TOLERANCE,
) -> Real:
    """
    Pearson's statistic: the smaller of the two one-sided Fisher p-values.

    Accepts vectors (one test) or ``(n, K)`` matrices (one test per row).

    """
    left = np.asarray(p_left, dtype=np.float64)
    right = np.asarray(p_right, dtype=np.float64)
    if left.shape != right.shape:
        raise DataError('left and right one-sided p-values differ in shape')
    check_one_sided(left, right, tol)
    K = left.shape[-1]
    fl = -2.0 * np.log(np.clip(left, CLAMP_FLOOR, 1.0)).sum(axis=-1)
    fr = -2.0 * np.log(np.clip(right, CLAMP_FLOOR, 1.0)).sum(axis=-1)
    out = np.minimum(
        analytic_pvalue(Method.FISHER, fl, K),
        analytic_pvalue(Method.FISHER, fr, K),
    )
    if left.ndim == 1:
        return float(out)
    return out


def pearson_stat_from_left(p_left: np.ndarray) -> np.ndarray:
    """Pearson's statistic for rows of left one-sided p-values."""
    left = np.atleast_2d(np.asarray(p_left, dtype=np.float64))
    return np.asarray(pearson_stat(left, 1.0 - left))


def rv_ensemble_stat(
    component_pvalues: Union[Sequence[float], np.ndarray],
    gamma: float = 1.0,
    truncate_at: Optional[float] = DEFAULT_DELTA,
) -> Real:
    """
    Regularly-varying ensemble ``sum g_gamma(p)`` with the Pareto transform.

    Parameters
    ----------
    component_pvalues : sequence of floats
        Constituent p-values (last axis)
    gamma : float, optional
        Tail index
    truncate_at : float, optional
        Truncation level delta; p-values above ``1 - delta`` are pinned to
        ``1 - delta``. ``None`` disables truncation.

    """
    arr = np.clip(np.asarray(component_pvalues, dtype=np.float64), CLAMP_FLOOR, 1.0)
    if arr.shape[-1] < 1:
        raise UsageError('at least one constituent p-value is required')
    if truncate_at is not None:
        if not 0.0 < truncate_at < 1.0:
            raise UsageError(f'truncation level must be in (0, 1): {truncate_at}')
        arr = np.minimum(arr, 1.0 - truncate_at)
    out = np.asarray(pareto_rv_transform(arr, gamma)).sum(axis=-1)
    if arr.ndim == 1:
        return float(out)
    return out
