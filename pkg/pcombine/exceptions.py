#!/usr/bin/env python
"""Exceptions raised by the p-value combination package."""
from __future__ import annotations


class PCombineError(Exception):
    """Base class for all package errors."""


class UsageError(PCombineError, ValueError):
    """Invalid method parameters, flags, or calling conventions."""


class DataError(PCombineError, ValueError):
    """Malformed or out-of-range input data."""


class RegressionError(DataError):
    """A per-feature regression could not be fit."""


class ResourceGuardError(PCombineError):
    """A request exceeds a configured resource or stability guard."""


class PCombineWarning(UserWarning):
    """Recoverable anomalies in input data or calibration."""
