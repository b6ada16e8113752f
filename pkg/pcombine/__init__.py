#!/usr/bin/env python
"""Combination tests for p-values across independent studies."""
from __future__ import annotations

__version__ = '0.1.0'

from .base import Combiner
from .base import CombinerPool
from .cache import NullTableCache
from .core import Calibration
from .core import CombineResult
from .core import Direction
from .core import Method
from .core import MethodSpec
from .core import parse_method_spec
from .core import PValueVector
from .core import SignedAssociation
from .core import validate
from .exceptions import DataError
from .exceptions import PCombineError
from .exceptions import PCombineWarning
from .exceptions import RegressionError
from .exceptions import ResourceGuardError
from .exceptions import UsageError
from .nulldist import build_null_table
from .nulldist import NullTable


def combine(p, method='fisher', **kwargs):  # type: ignore
    """Combine one p-value vector with ``method``; see :class:`Combiner`."""
    vec = validate(p)
    return Combiner(method, vec.K, **kwargs).combine(vec)


__all__ = (
    'Calibration',
    'combine',
    'Combiner',
    'CombinerPool',
    'CombineResult',
    'DataError',
    'Direction',
    'Method',
    'MethodSpec',
    'NullTable',
    'NullTableCache',
    'PCombineError',
    'PCombineWarning',
    'PValueVector',
    'RegressionError',
    'ResourceGuardError',
    'SignedAssociation',
    'UsageError',
    'build_null_table',
    'parse_method_spec',
    'validate',
)
