#!/usr/bin/env python
"""Survival functions on linear and log scales."""
from __future__ import annotations

from typing import Any
from typing import Union

import numpy as np
from scipy import special

from .exceptions import DataError

ArrayLike = Union[float, np.ndarray]

#: Below this value a survival function is recomputed on the log scale
_UNDERFLOW = 1e-290


def _check_nonnegative(x: np.ndarray) -> None:
    if np.isnan(x).any():
        raise DataError('chi-square argument must not be NaN')
    if (x < 0).any():
        raise DataError(f'chi-square argument must be non-negative: {x[x < 0].tolist()}')


def _scalar(value: np.ndarray, like: Any) -> ArrayLike:
    if np.ndim(like) == 0 and np.ndim(value) == 0:
        return float(value)
    return value


def chi2_sf(x: ArrayLike, df: ArrayLike) -> ArrayLike:
    """
    Survival function of the chi-square distribution.

    Evaluated as the regularized upper incomplete gamma function
    ``Q(df / 2, x / 2)``.

    Parameters
    ----------
    x : float or ndarray
        Non-negative argument(s)
    df : int or ndarray
        Degrees of freedom

    Returns
    -------
    float or ndarray

    """
    xa = np.asarray(x, dtype=np.float64)
    _check_nonnegative(xa)
    out = special.gammaincc(np.asarray(df, dtype=np.float64) / 2.0, xa / 2.0)
    return _scalar(out, x)


def even_chi2_logsf(x: ArrayLike, df: ArrayLike) -> ArrayLike:
    """
    Log survival function for even degrees of freedom by the finite series.

    For ``df = 2j``, ``SF(x) = exp(-x/2) * sum_{m<j} (x/2)**m / m!``; the sum is
    evaluated with ``logsumexp`` so it never underflows.

    """
    xa, dfa = np.broadcast_arrays(
        np.asarray(x, dtype=np.float64), np.asarray(df, dtype=np.int64),
    )
    if (dfa % 2 != 0).any() or (dfa <= 0).any():
        raise ValueError('degrees of freedom must be positive and even')
    _check_nonnegative(xa)
    j = dfa // 2
    jmax = int(j.max()) if j.size else 1
    m = np.arange(jmax, dtype=np.float64)
    half = xa[..., None] / 2.0
    terms = special.xlogy(m, half) - special.gammaln(m + 1.0)
    terms = np.where(m < j[..., None], terms, -np.inf)
    out = special.logsumexp(terms, axis=-1) - xa / 2.0
    return _scalar(np.minimum(out, 0.0), x)


def _asymptotic_log_gammaincc(a: np.ndarray, z: np.ndarray) -> np.ndarray:
    # Leading terms of the large-argument expansion of log Q(a, z)
    series = 1.0 + (a - 1.0) / z + (a - 1.0) * (a - 2.0) / z ** 2
    return (
        (a - 1.0) * np.log(z) - z - special.gammaln(a)
        + np.log(np.maximum(series, np.finfo(np.float64).tiny))
    )


def chi2_logsf(x: ArrayLike, df: ArrayLike) -> ArrayLike:
    """
    Log survival function of the chi-square distribution.

    Uses ``log(Q(df/2, x/2))`` where that is representable and falls back to
    the exact even-df series (or a large-argument expansion for odd df) in
    the far tail.

    """
    xa, dfa = np.broadcast_arrays(
        np.asarray(x, dtype=np.float64), np.asarray(df, dtype=np.float64),
    )
    _check_nonnegative(xa)
    sf = special.gammaincc(dfa / 2.0, xa / 2.0)
    with np.errstate(divide='ignore'):
        out = np.log(sf)
    tail = sf < _UNDERFLOW
    if tail.any():
        even = tail & (dfa % 2 == 0)
        if even.any():
            out = np.array(out, copy=True)
            out[even] = even_chi2_logsf(xa[even], dfa[even].astype(np.int64))
        odd = tail & ~(dfa % 2 == 0)
        if odd.any():
            out = np.array(out, copy=True)
            out[odd] = _asymptotic_log_gammaincc(dfa[odd] / 2.0, xa[odd] / 2.0)
    return _scalar(out, x)


def norm_sf(z: ArrayLike) -> ArrayLike:
    """Standard normal survival function."""
    return _scalar(special.ndtr(-np.asarray(z, dtype=np.float64)), z)


def norm_logsf(z: ArrayLike) -> ArrayLike:
    """Log of the standard normal survival function, accurate in the far tail."""
    return _scalar(special.log_ndtr(-np.asarray(z, dtype=np.float64)), z)


def norm_isf(p: ArrayLike) -> ArrayLike:
    """Upper-tail standard normal quantile, ``Phi^-1(1 - p)``."""
    return _scalar(-special.ndtri(np.asarray(p, dtype=np.float64)), p)


def norm_isf_log(logp: ArrayLike) -> ArrayLike:
    """Upper-tail standard normal quantile from a log-scale probability."""
    return _scalar(-special.ndtri_exp(np.asarray(logp, dtype=np.float64)), logp)


def cauchy_sf(x: ArrayLike) -> ArrayLike:
    """
    Standard Cauchy survival function ``1/2 - arctan(x)/pi``.

    The positive tail is evaluated as ``arctan(1/x)/pi`` to keep relative
    precision for large statistics.

    """
    xa = np.asarray(x, dtype=np.float64)
    with np.errstate(divide='ignore'):
        upper = np.arctan(1.0 / xa) / np.pi
    out = np.where(xa > 1.0, upper, 0.5 - np.arctan(xa) / np.pi)
    return _scalar(np.clip(out, 0.0, 1.0), x)


def cauchy_isf(p: ArrayLike) -> ArrayLike:
    """Inverse of :func:`cauchy_sf`."""
    pa = np.asarray(p, dtype=np.float64)
    return _scalar(np.tan(np.pi * (0.5 - pa)), p)
