#!/usr/bin/env python
"""Column types for persisting numpy arrays through SQLAlchemy."""
from __future__ import annotations

from typing import Any
from typing import Optional

import numpy as np
from sqlalchemy.types import LargeBinary
from sqlalchemy.types import TypeDecorator


class NDArray(TypeDecorator):  # type: ignore
    """
    One-dimensional numpy array stored as a little-endian binary buffer.

    Parameters
    ----------
    elem_type : str, optional
        Element type code: F16, F32, F64, I8, I16, I32 or I64

    """

    impl = LargeBinary
    cache_ok = True

    F16 = FLOAT16 = 'F16'
    F32 = FLOAT32 = 'F32'
    F64 = FLOAT64 = 'F64'
    I8 = INT8 = 'I8'
    I16 = INT16 = 'I16'
    I32 = INT32 = 'I32'
    I64 = INT64 = 'I64'

    _dtypes = {
        'F16': '<f2',
        'F32': '<f4',
        'F64': '<f8',
        'I8': '<i1',
        'I16': '<i2',
        'I32': '<i4',
        'I64': '<i8',
    }

    def __init__(self, elem_type: Optional[str] = None) -> None:
        self.elem_type = (elem_type or 'F64').upper()
        if self.elem_type not in self._dtypes:
            raise ValueError(f'unknown element type: {elem_type}')
        super().__init__()

    @property
    def dtype(self) -> np.dtype:  # type: ignore
        return np.dtype(self._dtypes[self.elem_type])

    @property
    def python_type(self) -> type:
        return np.ndarray

    def process_bind_param(self, value: Any, dialect: Any) -> Optional[bytes]:
        if value is None:
            return None
        return np.ascontiguousarray(value, dtype=self.dtype).ravel().tobytes()

    def process_result_value(self, value: Any, dialect: Any) -> Optional[np.ndarray]:
        if value is None:
            return None
        return np.frombuffer(bytes(value), dtype=self.dtype).astype(
            self.dtype.newbyteorder('='),
        )
