#!/usr/bin/env python
# type: ignore
"""Counter-based random streams."""
from __future__ import annotations

import unittest

import numpy as np

from pcombine.rng import block_generator
from pcombine.rng import block_ranges
from pcombine.rng import map_blocks
from pcombine.rng import normal_rows
from pcombine.rng import REPLICATE_BLOCK
from pcombine.rng import Stream
from pcombine.rng import uniform_rows


class TestStreams(unittest.TestCase):

    def test_deterministic(self):
        a = uniform_rows(7, Stream.TABLE, 0, 100, 3)
        b = uniform_rows(7, Stream.TABLE, 0, 100, 3)
        assert np.array_equal(a, b)
        assert a.shape == (100, 3)

    def test_streams_and_seeds_differ(self):
        a = uniform_rows(7, Stream.TABLE, 0, 50, 2)
        assert not np.array_equal(a, uniform_rows(7, Stream.OMNIBUS, 0, 50, 2))
        assert not np.array_equal(a, uniform_rows(8, Stream.TABLE, 0, 50, 2))

    def test_rows_are_addressable(self):
        start, stop = REPLICATE_BLOCK - 10, REPLICATE_BLOCK + 25
        full = uniform_rows(3, Stream.SIMULATION, 0, stop + 5, 4)
        part = uniform_rows(3, Stream.SIMULATION, start, stop, 4)
        assert np.array_equal(full[start:stop], part)
        normal = normal_rows(3, Stream.SLOPE, 0, stop, 2)
        tail = normal_rows(3, Stream.SLOPE, start, stop, 2)
        assert np.array_equal(normal[start:], tail)

    def test_uniform_range(self):
        u = uniform_rows(11, Stream.TABLE, 0, 20000, 1)
        assert (u > 0).all() and (u <= 1).all()
        assert abs(u.mean() - 0.5) < 0.01, u.mean()

    def test_empty_range(self):
        assert uniform_rows(1, Stream.TABLE, 5, 5, 3).shape == (0, 3)
        with self.assertRaises(ValueError):
            uniform_rows(1, Stream.TABLE, 5, 4, 3)
        with self.assertRaises(ValueError):
            block_generator(1, Stream.TABLE, -1)

    def test_large_seed(self):
        a = uniform_rows(2 ** 64 + 5, Stream.TABLE, 0, 10, 2)
        b = uniform_rows(5, Stream.TABLE, 0, 10, 2)
        assert np.array_equal(a, b)


class TestBlocks(unittest.TestCase):

    def test_block_ranges(self):
        ranges = block_ranges(10, 4)
        assert [(r.start, r.stop) for r in ranges] == [(0, 4), (4, 8), (8, 10)]
        assert block_ranges(0, 4) == []

    def test_map_blocks_thread_invariance(self):
        def fn(start, stop):
            return uniform_rows(5, Stream.TABLE, start, stop, 3).sum(axis=1)

        serial = np.concatenate(map_blocks(fn, 10000, threads=1, chunk=1000))
        threaded = np.concatenate(map_blocks(fn, 10000, threads=4, chunk=1000))
        assert np.array_equal(serial, threaded)
        assert serial.shape == (10000,)


if __name__ == '__main__':
    unittest.main()
