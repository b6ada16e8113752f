#!/usr/bin/env python
"""Domain types shared by all p-value combination modules."""
from __future__ import annotations

import enum
import math
import re
import warnings
from dataclasses import dataclass
from dataclasses import field
from typing import Any
from typing import Dict
from typing import Iterable
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
import pandas as pd

from .exceptions import DataError
from .exceptions import PCombineWarning
from .exceptions import UsageError

#: Floor applied to p-values of exactly zero before log / tan transforms
CLAMP_FLOOR = 1e-15

DEFAULT_TAU_SET: Tuple[float, ...] = (0.01, 0.05, 0.5, 1.0)
DEFAULT_DELTA = 0.01
DEFAULT_GAMMA = 1.0

#: Default Monte Carlo table size
DEFAULT_B = 100_000
DEFAULT_TABLE_SEED = 20240101

#: Upper bound on B * K cells materialized by a table build
DEFAULT_MEMORY_BUDGET = 1_000_000_000


class Method(str, enum.Enum):
    """Combination methods."""

    FISHER = 'fisher'
    STOUFFER = 'stouffer'
    MINP = 'minp'
    AFP = 'afp'
    AFZ = 'afz'
    TFHARD = 'tfhard'
    TFSOFT = 'tfsoft'
    OTFHARD = 'otfhard'
    OTFSOFT = 'otfsoft'
    CAUCHY = 'cauchy'
    TRUNC_CAUCHY = 'trunccauchy'
    HARMONIC_MEAN = 'harmonicmean'
    PARETO_RV = 'paretorv'
    BJ = 'bj'
    HC = 'hc'
    PEARSON = 'pearson'
    FE = 'fe'
    FECS = 'fecs'

    def __str__(self) -> str:
        return self.value


class Direction(str, enum.Enum):
    LARGE = 'LargeIsSignificant'
    SMALL = 'SmallIsSignificant'


class Calibration(str, enum.Enum):
    ANALYTIC = 'Analytic'
    MONTE_CARLO = 'MonteCarlo'
    CAUCHY_APPROX = 'CauchyApprox'


class MethodNames(Dict[str, Method]):
    """Method lookup by name or alias, ignoring case, spaces, ``_`` and ``-``."""

    @staticmethod
    def normalize(name: str) -> str:
        return re.sub(r'[\s_-]+', '', name).lower()

    def __init__(self, aliases: Dict[str, Method]) -> None:
        super().__init__()
        for method in Method:
            self[method.value] = method
        for alias, method in aliases.items():
            self[alias] = method

    def __contains__(self, name: object) -> bool:
        return isinstance(name, str) and super().__contains__(self.normalize(name))

    def __getitem__(self, name: str) -> Method:
        return super().__getitem__(self.normalize(name))

    def __setitem__(self, name: str, method: Method) -> None:
        super().__setitem__(self.normalize(name), method)

    def get(self, name: str, default: Any = None) -> Any:
        return self[name] if name in self else default


method_names = MethodNames(dict(
    ca=Method.CAUCHY, hm=Method.HARMONIC_MEAN, pareto=Method.PARETO_RV,
))

SMALL_IS_SIGNIFICANT = frozenset([
    Method.MINP, Method.HARMONIC_MEAN, Method.OTFHARD,
    Method.OTFSOFT, Method.PEARSON,
])
ANALYTIC_METHODS = frozenset([
    Method.FISHER, Method.STOUFFER, Method.MINP, Method.CAUCHY,
])
CAUCHY_APPROX_METHODS = frozenset([Method.FE, Method.FECS, Method.TRUNC_CAUCHY])
ONE_SIDED_METHODS = frozenset([Method.FECS, Method.PEARSON])
TAU_METHODS = frozenset([Method.TFHARD, Method.TFSOFT])
OMNIBUS_METHODS = frozenset([Method.OTFHARD, Method.OTFSOFT])
ENSEMBLE_METHODS = frozenset([Method.FE, Method.FECS])

#: Methods usable as FE / FE_CS constituents
CONSTITUENT_METHODS = frozenset(Method) - ENSEMBLE_METHODS - ONE_SIDED_METHODS


def lookup_method(name: Union[str, Method]) -> Method:
    """Resolve a method name or alias (case-insensitive)."""
    if isinstance(name, Method):
        return name
    method = method_names.get(name.strip())
    if method is None:
        raise UsageError(f'unknown combination method: {name!r}')
    return method


def _format_float(value: float) -> str:
    return repr(float(value))


@dataclass(frozen=True)
class MethodSpec:
    """
    A combination method together with its tuning parameters.

    Parameters
    ----------
    method : Method
        The combination method
    tau : float, optional
        Truncation threshold in (0, 1]; required for TFhard / TFsoft
    tau_set : tuple of floats, optional
        Strictly increasing thresholds for the omnibus tests
    delta : float, optional
        Truncation level of the truncated Cauchy transform
    gamma : float, optional
        Tail index of the Pareto transform
    constituents : tuple of Methods, optional
        Constituent tests of FE / FE_CS

    """

    method: Method
    tau: Optional[float] = None
    tau_set: Tuple[float, ...] = DEFAULT_TAU_SET
    delta: float = DEFAULT_DELTA
    gamma: float = DEFAULT_GAMMA
    constituents: Tuple[Method, ...] = (Method.FISHER, Method.AFP)

    def __post_init__(self) -> None:
        object.__setattr__(self, 'method', lookup_method(self.method))
        object.__setattr__(
            self, 'tau_set', tuple(float(x) for x in self.tau_set),
        )
        object.__setattr__(
            self, 'constituents', tuple(lookup_method(x) for x in self.constituents),
        )

        if self.method in TAU_METHODS:
            if self.tau is None:
                raise UsageError(f'{self.method} requires a truncation threshold tau')
            object.__setattr__(self, 'tau', float(self.tau))
            if not 0.0 < self.tau <= 1.0:
                raise UsageError(f'tau must be in (0, 1]: {self.tau}')
        elif self.tau is not None:
            object.__setattr__(self, 'tau', None)

        if not self.tau_set:
            raise UsageError('tau_set must not be empty')
        if any(not 0.0 < x <= 1.0 for x in self.tau_set):
            raise UsageError(f'tau_set values must be in (0, 1]: {self.tau_set}')
        if any(b <= a for a, b in zip(self.tau_set, self.tau_set[1:])):
            raise UsageError(f'tau_set must be strictly increasing: {self.tau_set}')

        if not 0.0 < self.delta < 1.0:
            raise UsageError(f'delta must be in (0, 1): {self.delta}')
        if not self.gamma > 0.0:
            raise UsageError(f'gamma must be positive: {self.gamma}')

        if self.method in ENSEMBLE_METHODS:
            if len(self.constituents) < 2:
                raise UsageError('ensembles need at least two constituent tests')
            bad = [x for x in self.constituents if x not in CONSTITUENT_METHODS]
            if bad:
                raise UsageError(
                    'invalid ensemble constituents: %s' % ', '.join(map(str, bad)),
                )
            if any(x in TAU_METHODS for x in self.constituents):
                raise UsageError('TFhard / TFsoft cannot be ensemble constituents')

    @property
    def direction(self) -> Direction:
        if self.method in SMALL_IS_SIGNIFICANT:
            return Direction.SMALL
        return Direction.LARGE

    @property
    def is_one_sided(self) -> bool:
        return self.method in ONE_SIDED_METHODS

    @property
    def params(self) -> Dict[str, str]:
        """Parameters that affect the statistic, as canonical strings."""
        out: Dict[str, str] = {}
        if self.method in TAU_METHODS:
            out['tau'] = _format_float(self.tau)  # type: ignore
        if self.method in OMNIBUS_METHODS:
            out['tau_set'] = '+'.join(_format_float(x) for x in self.tau_set)
        if self.method in ENSEMBLE_METHODS or self.method is Method.TRUNC_CAUCHY:
            out['delta'] = _format_float(self.delta)
        if self.method is Method.PARETO_RV:
            out['gamma'] = _format_float(self.gamma)
        if self.method in ENSEMBLE_METHODS:
            out['constituents'] = '+'.join(x.value for x in self.constituents)
        return out

    @property
    def key(self) -> str:
        """Canonical string form, e.g. ``tfhard(tau=0.05)``."""
        params = self.params
        if not params:
            return self.method.value
        return '%s(%s)' % (
            self.method.value,
            ','.join('%s=%s' % (k, v) for k, v in params.items()),
        )

    def replace(self, **kwargs: Any) -> 'MethodSpec':
        data = dict(
            method=self.method, tau=self.tau, tau_set=self.tau_set,
            delta=self.delta, gamma=self.gamma, constituents=self.constituents,
        )
        data.update(kwargs)
        return MethodSpec(**data)

    def __str__(self) -> str:
        return self.key


def _re_compile(regex: str) -> Any:
    """Compile a string to regex, I and UNICODE."""
    return re.compile(regex, re.I | re.UNICODE)


_re_method_spec = _re_compile(
    r'^\s*(?P<name>[\w\-]+)\s*(?:\(\s*(?P<args>[^()]*)\s*\))?\s*$',
)
_re_method_arg = _re_compile(r'^\s*(?P<key>\w+)\s*=\s*(?P<value>[^=]+?)\s*$')


def _split_values(value: str) -> List[str]:
    return [x for x in re.split(r'\s*[+;/ ]\s*', value.strip()) if x]


def parse_method_spec(text: Union[str, MethodSpec], **overrides: Any) -> MethodSpec:
    """
    Parse a method specification string.

    Accepts bare names (``fisher``), aliases (``hm``) and parameterized
    forms such as ``tfhard(tau=0.05)``, ``otfsoft(tau_set=0.01+0.5+1)`` or
    ``fe(delta=0.01,constituents=fisher+afp+minp)``.

    Parameters
    ----------
    text : str or MethodSpec
        The specification
    **overrides : keyword arguments, optional
        Parameter values that replace the parsed ones when not ``None``

    Returns
    -------
    MethodSpec

    """
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if isinstance(text, MethodSpec):
        return text.replace(**overrides) if overrides else text

    m = _re_method_spec.match(text)
    if not m:
        raise UsageError(f'malformed method specification: {text!r}')

    kwargs: Dict[str, Any] = {}
    args = m.group('args')
    if args:
        for item in args.split(','):
            am = _re_method_arg.match(item)
            if not am:
                raise UsageError(f'malformed method parameter {item!r} in {text!r}')
            key, value = am.group('key').lower(), am.group('value')
            try:
                if key in ('tau', 'delta', 'gamma'):
                    kwargs[key] = float(value)
                elif key == 'tau_set':
                    kwargs[key] = tuple(float(x) for x in _split_values(value))
                elif key == 'constituents':
                    kwargs[key] = tuple(_split_values(value))
                else:
                    raise UsageError(f'unknown method parameter {key!r} in {text!r}')
            except ValueError as exc:
                if isinstance(exc, UsageError):
                    raise
                raise UsageError(f'invalid value for {key!r}: {value!r}') from exc

    kwargs.update(overrides)
    return MethodSpec(lookup_method(m.group('name')), **kwargs)


def split_method_list(text: str) -> List[str]:
    """Split a comma-separated list of method specs, keeping parenthesized commas."""
    items: List[str] = []
    depth = 0
    current = ''
    for ch in text:
        if ch == '(':
            depth += 1
        elif ch == ')':
            depth -= 1
        if ch == ',' and depth == 0:
            items.append(current)
            current = ''
        else:
            current += ch
    items.append(current)
    return [x.strip() for x in items if x.strip()]


def parse_method_list(text: str) -> List[MethodSpec]:
    """Parse a comma-separated list of method specs."""
    return [parse_method_spec(x) for x in split_method_list(text)]


@dataclass(frozen=True)
class PValueVector:
    """
    An ordered vector of K p-values.

    ``clamped`` records whether zeros were raised to the clamp floor
    during validation.

    """

    values: Tuple[float, ...]
    id: Optional[str] = None
    clamped: bool = False

    @property
    def K(self) -> int:
        return len(self.values)

    @property
    def array(self) -> np.ndarray:
        out = np.array(self.values, dtype=np.float64)
        out.setflags(write=False)
        return out

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Any:
        return iter(self.values)


def validate(
    p: Union[PValueVector, Sequence[float], np.ndarray],
    floor: float = CLAMP_FLOOR,
    id: Optional[str] = None,
) -> PValueVector:
    """
    Validate a p-value vector, clamping exact zeros to ``floor``.

    Parameters
    ----------
    p : PValueVector or sequence of floats
        The p-values
    floor : float, optional
        Replacement for values of exactly zero
    id : str, optional
        Feature label; defaults to the label already on ``p``

    Returns
    -------
    PValueVector

    """
    clamped = False
    if isinstance(p, PValueVector):
        id = id if id is not None else p.id
        clamped = p.clamped
        values = np.asarray(p.values, dtype=np.float64)
    else:
        try:
            values = np.asarray(p, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise DataError(f'p-values must be numeric: {exc}') from exc

    if values.ndim != 1:
        raise DataError('p-values must form a one-dimensional vector')
    if values.size == 0:
        raise DataError('p-value vector must not be empty')
    if np.isnan(values).any():
        raise DataError('p-values must not be NaN')
    if ((values < 0.0) | (values > 1.0)).any():
        bad = values[(values < 0.0) | (values > 1.0)]
        raise DataError(f'p-values must be in [0, 1]: {bad.tolist()}')

    zeros = values == 0.0
    if zeros.any():
        warnings.warn(
            f'{int(zeros.sum())} p-value(s) of exactly 0 clamped to {floor:g}',
            PCombineWarning,
            stacklevel=2,
        )
        values = np.where(zeros, floor, values)
        clamped = True

    return PValueVector(tuple(float(x) for x in values), id=id, clamped=clamped)


def validate_matrix(p: Any, floor: float = CLAMP_FLOOR) -> np.ndarray:
    """Validate an ``(n, K)`` p-value matrix or a vector; zeros become ``floor``."""
    try:
        arr = np.array(p, dtype=np.float64, ndmin=2)
    except (TypeError, ValueError) as exc:
        raise DataError(f'p-values must be numeric: {exc}') from exc
    if arr.ndim != 2 or arr.shape[1] == 0:
        raise DataError('p-values must form an (n, K) matrix with K >= 1')
    if np.isnan(arr).any():
        raise DataError('p-values must not be NaN')
    if ((arr < 0.0) | (arr > 1.0)).any():
        raise DataError('p-values must be in [0, 1]')
    zeros = arr == 0.0
    if zeros.any():
        warnings.warn(
            f'{int(zeros.sum())} p-value(s) of exactly 0 clamped to {floor:g}',
            PCombineWarning,
            stacklevel=2,
        )
        arr[zeros] = floor
    return arr


def clamp(p: np.ndarray, floor: float = CLAMP_FLOOR) -> np.ndarray:
    """Clamp an array of p-values into [floor, 1]."""
    return np.clip(np.asarray(p, dtype=np.float64), floor, 1.0)


@dataclass(frozen=True)
class CombineResult:
    """Outcome of combining one p-value vector."""

    statistic: float
    pvalue: float
    calibration: Calibration
    selected_weights: Optional[Tuple[int, ...]] = None
    j_star: Optional[int] = None
    method: Optional[str] = None
    id: Optional[str] = None
    clamped: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.pvalue <= 1.0 or math.isnan(self.pvalue):
            raise DataError(f'combined p-value out of range: {self.pvalue}')
        if self.selected_weights is not None and self.j_star is not None:
            if sum(self.selected_weights) != self.j_star:
                raise DataError('selected weights must select exactly j_star p-values')


@dataclass(frozen=True)
class SignedAssociation:
    """Direction and strength of one per-study association."""

    beta_sign: int
    p_left: float
    p_right: float
    e_measure: float

    def __post_init__(self) -> None:
        if self.beta_sign not in (-1, 1):
            raise DataError(f'beta_sign must be -1 or +1: {self.beta_sign}')
        if not math.isclose(self.p_left + self.p_right, 1.0, rel_tol=0.0, abs_tol=1e-9):
            raise DataError(
                f'one-sided p-values must sum to 1: {self.p_left} + {self.p_right}',
            )


@dataclass
class PValueMatrix:
    """A feature-by-K matrix of p-values read from a wide CSV."""

    ids: List[str]
    values: np.ndarray
    columns: List[str] = field(default_factory=list)

    def rows(self) -> Iterable[PValueVector]:
        for id, row in zip(self.ids, self.values):
            yield PValueVector(tuple(float(x) for x in row), id=id)


def read_pvalue_matrix(path: str) -> PValueMatrix:
    """
    Read a wide p-value CSV with header ``id,p1,...,pK``.

    Raises
    ------
    DataError
        On missing cells, non-numeric cells, or values outside [0, 1]

    """
    try:
        df = pd.read_csv(path, dtype=str, encoding='utf-8')
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f'could not read p-value matrix {path}: {exc}') from exc

    if df.shape[1] < 2:
        raise DataError(f'{path}: expected columns id,p1,...,pK')

    ids = df.iloc[:, 0].astype(str).tolist()
    body = df.iloc[:, 1:]
    numeric = body.apply(pd.to_numeric, errors='coerce')
    bad = numeric.isna() & body.notna()
    if bad.any(axis=None):
        row = int(np.argmax(bad.any(axis=1).to_numpy()))
        raise DataError(f'{path}: non-numeric p-value in row {row + 1} ({ids[row]})')
    if numeric.isna().any(axis=None):
        row = int(np.argmax(numeric.isna().any(axis=1).to_numpy()))
        raise DataError(f'{path}: missing p-value in row {row + 1} ({ids[row]})')

    values = numeric.to_numpy(dtype=np.float64)
    if ((values < 0.0) | (values > 1.0)).any():
        row = int(np.argmax(((values < 0.0) | (values > 1.0)).any(axis=1)))
        raise DataError(f'{path}: p-value outside [0, 1] in row {row + 1} ({ids[row]})')

    return PValueMatrix(ids=ids, values=values, columns=list(body.columns))
