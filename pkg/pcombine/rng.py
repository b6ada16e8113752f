#!/usr/bin/env python
"""
Counter-based random streams keyed by replicate index.

Draws are organized in fixed-size blocks of replicates. Each block gets its
own ``Philox`` generator whose key encodes ``(stream, seed)`` and whose counter
starts at the block index shifted into the high word, so row ``r`` of a stream
is the same no matter how many workers produce it or in which order.

"""
from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable
from typing import List
from typing import Optional
from typing import TypeVar

import numpy as np

logger = logging.getLogger(__name__)

#: Replicates per generator block
REPLICATE_BLOCK = 4096

_MASK64 = (1 << 64) - 1

T = TypeVar('T')


class Stream(enum.IntEnum):
    """Independent random streams used by the package."""

    TABLE = 1
    OMNIBUS = 2
    ENSEMBLE = 3
    SIMULATION = 4
    NULL_SIMULATION = 5
    SLOPE = 6
    SELECTION = 7
    SYNTHETIC = 8
    PEARSON = 9


def block_generator(seed: int, stream: int, block: int) -> np.random.Generator:
    """
    Return the generator for one block of replicates.

    Parameters
    ----------
    seed : int
        User seed; reduced modulo 2**64
    stream : int
        Stream identifier
    block : int
        Block index (replicate // REPLICATE_BLOCK)

    Returns
    -------
    numpy.random.Generator

    """
    if block < 0:
        raise ValueError(f'block index must be non-negative: {block}')
    key = ((int(stream) & _MASK64) << 64) | (int(seed) & _MASK64)
    counter = int(block) << 192
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def _rows(
    draw: Callable[[np.random.Generator, int, int], np.ndarray],
    seed: int,
    stream: int,
    start: int,
    stop: int,
    K: int,
) -> np.ndarray:
    if stop < start:
        raise ValueError(f'invalid row range: {start}..{stop}')
    out = np.empty((stop - start, K), dtype=np.float64)
    row = start
    while row < stop:
        block = row // REPLICATE_BLOCK
        offset = row - block * REPLICATE_BLOCK
        take = min(REPLICATE_BLOCK - offset, stop - row)
        values = draw(block_generator(seed, stream, block), offset + take, K)
        out[row - start:row - start + take] = values[offset:offset + take]
        row += take
    return out


def _uniform(gen: np.random.Generator, n: int, K: int) -> np.ndarray:
    # 1 - U maps [0, 1) onto (0, 1]; p-values of exactly zero never occur
    return 1.0 - gen.random((n, K))


def _normal(gen: np.random.Generator, n: int, K: int) -> np.ndarray:
    return gen.standard_normal((n, K))


def uniform_rows(seed: int, stream: int, start: int, stop: int, K: int) -> np.ndarray:
    """Rows ``start..stop-1`` of Uniform(0, 1] draws, shape ``(stop - start, K)``."""
    return _rows(_uniform, seed, stream, start, stop, K)


def normal_rows(seed: int, stream: int, start: int, stop: int, K: int) -> np.ndarray:
    """Rows ``start..stop-1`` of standard normal draws, shape ``(stop - start, K)``."""
    return _rows(_normal, seed, stream, start, stop, K)


def block_ranges(n_rows: int, chunk: int = REPLICATE_BLOCK) -> List[range]:
    """Split ``0..n_rows-1`` into consecutive ranges of at most ``chunk`` rows."""
    return [range(i, min(i + chunk, n_rows)) for i in range(0, n_rows, chunk)]


def map_blocks(
    fn: Callable[[int, int], T],
    n_rows: int,
    threads: Optional[int] = None,
    chunk: int = REPLICATE_BLOCK,
) -> List[T]:
    """
    Apply ``fn(start, stop)`` to consecutive row blocks.

    Results are returned in block order. With ``threads`` greater than one
    the blocks are evaluated in a thread pool; numpy releases the GIL in the
    heavy kernels so this scales for large tables.

    """
    ranges = block_ranges(n_rows, chunk)
    if not threads or threads <= 1 or len(ranges) <= 1:
        return [fn(r.start, r.stop) for r in ranges]
    logger.debug('evaluating %d blocks on %d threads', len(ranges), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: fn(r.start, r.stop), ranges))
