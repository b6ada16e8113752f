#!/usr/bin/env python
# type: ignore
"""Fisher ensembles, Pearson's test and regularly-varying ensembles."""
from __future__ import annotations

import math
import os
import unittest

import numpy as np

from pcombine.base import CombinerPool
from pcombine.ensemble import check_one_sided
from pcombine.ensemble import EnsembleInput
from pcombine.ensemble import ensemble_stat
from pcombine.ensemble import fe_pvalue
from pcombine.ensemble import fe_stat
from pcombine.ensemble import fecs_pvalue
from pcombine.ensemble import fecs_stat
from pcombine.ensemble import pearson_stat
from pcombine.ensemble import pearson_stat_from_left
from pcombine.ensemble import rv_ensemble_stat
from pcombine.ensemble import size_inflation_bound
from pcombine.exceptions import DataError
from pcombine.exceptions import UsageError
from pcombine.powersim import estimate_type1

SLOW = bool(os.environ.get('PCOMBINE_SLOW_TESTS'))


class TestFisherEnsemble(unittest.TestCase):

    def test_examples(self):
        assert abs(fe_stat(0.5, 0.5)) < 1e-12
        assert abs(fe_stat(0.01, 0.02) - 23.8575) < 1e-3, fe_stat(0.01, 0.02)
        assert abs(fe_stat(1.0, 0.5) + 15.9103) < 1e-3, fe_stat(1.0, 0.5)

    def test_pvalues(self):
        assert fe_pvalue(0.0) == 0.5
        assert abs(fe_pvalue(23.8575) - 0.013334) < 1e-5, fe_pvalue(23.8575)
        assert fe_pvalue(np.inf) == 0.0
        assert abs(fe_pvalue(fe_stat(0.5, 0.5)) - 0.5) < 1e-12

    def test_truncation_floor(self):
        floor = -31.8205
        assert fe_stat(1.0, 1.0) > floor - 1e-3
        assert abs(fe_stat(1.0, 1.0) - fe_stat(0.995, 0.999)) < 1e-12

    def test_symmetric_and_vectorized(self):
        assert fe_stat(0.03, 0.4) == fe_stat(0.4, 0.03)
        out = fe_stat(np.array([0.01, 0.5]), np.array([0.02, 0.5]))
        assert out.shape == (2,)
        assert abs(out[0] - 23.8575) < 1e-3

    def test_zero_is_floored(self):
        assert math.isfinite(fe_stat(0.0, 0.5))

    def test_invalid(self):
        with self.assertRaises(DataError):
            fe_stat(1.5, 0.5)
        with self.assertRaises(DataError):
            fe_stat(float('nan'), 0.5)

    def test_ensemble_input(self):
        ens = EnsembleInput((0.01, 0.02))
        assert ens.L == 2
        assert abs(ens.statistic() - 23.8575) < 1e-3
        assert abs(ens.pvalue() - 0.013334) < 1e-5
        with self.assertRaises(UsageError):
            EnsembleInput((0.01,))
        with self.assertRaises(UsageError):
            EnsembleInput((0.01, 0.2), labels=('fisher',))

    def test_generic_average(self):
        stat = ensemble_stat(np.array([0.01, 0.01, 0.01]))
        assert abs(stat - 31.8205) < 1e-3
        out = ensemble_stat(np.full((4, 3), 0.5))
        assert np.allclose(out, 0.0)

    def test_size_inflation_bound(self):
        assert math.isclose(size_inflation_bound(2), 1.0201)
        assert math.isclose(size_inflation_bound(4, 0.05), 1.05 ** 4)


class TestConcordantEnsemble(unittest.TestCase):

    def test_examples(self):
        assert abs(fecs_stat(0.01, 0.99, 0.01, 0.99)) < 1e-9
        stat = fecs_stat(0.001, 1.0, 0.001, 1.0)
        assert abs(stat - 143.244) < 0.01, stat
        assert abs(fecs_pvalue(fecs_stat(0.5, 0.5, 0.5, 0.5)) - 0.5) < 1e-12

    def test_tail(self):
        x = 1e6
        assert math.isclose(fecs_pvalue(x), 1.0 / (math.pi * x), rel_tol=1e-6)


class TestPearson(unittest.TestCase):

    def test_single_study(self):
        assert math.isclose(pearson_stat([0.01], [0.99]), 0.01, rel_tol=1e-12)
        assert math.isclose(pearson_stat([0.99], [0.01]), 0.01, rel_tol=1e-12)

    def test_symmetric_point(self):
        assert math.isclose(pearson_stat([0.5, 0.5], [0.5, 0.5]), 0.5, rel_tol=1e-12)

    def test_from_left(self):
        left = np.array([[0.01, 0.2], [0.9, 0.95]])
        out = pearson_stat_from_left(left)
        assert out.shape == (2,)
        assert math.isclose(out[0], pearson_stat(left[0], 1 - left[0]), rel_tol=1e-12)

    def test_inconsistent_pairs(self):
        with self.assertRaises(DataError):
            pearson_stat([0.1, 0.2], [0.8, 0.9])
        with self.assertRaises(DataError):
            pearson_stat([0.1], [0.9, 0.1])
        with self.assertRaises(DataError):
            check_one_sided(np.array([0.3]), np.array([0.6]))
        check_one_sided(np.array([0.3]), np.array([0.7]))


class TestRegularlyVarying(unittest.TestCase):

    def test_examples(self):
        assert math.isclose(rv_ensemble_stat([0.1], truncate_at=None), 10.0)
        assert math.isclose(rv_ensemble_stat([0.01, 0.5]), 102.0)
        assert math.isclose(rv_ensemble_stat([1.0, 1.0], truncate_at=None), 2.0)
        assert math.isclose(rv_ensemble_stat([1.0, 1.0]), 2.0 / 0.99)
        assert math.isclose(rv_ensemble_stat([0.25], gamma=2.0), 2.0)

    def test_vectorized(self):
        out = rv_ensemble_stat(np.array([[0.1, 0.1], [0.5, 0.5]]), truncate_at=None)
        assert np.allclose(out, [20.0, 4.0])

    def test_invalid(self):
        with self.assertRaises(UsageError):
            rv_ensemble_stat([0.1], truncate_at=1.5)
        with self.assertRaises(UsageError):
            rv_ensemble_stat([0.1], gamma=-1.0)


class TestEnsembleSize(unittest.TestCase):

    def check_size(self, method, K, alpha, reps, pool):
        rate = estimate_type1(method, K, alpha=alpha, reps=reps, seed=K, pool=pool)
        bound = size_inflation_bound(2 if method == 'fe' else 4) * alpha
        se = math.sqrt(alpha * (1 - alpha) / reps)
        assert rate <= bound + 3 * se, (method, K, alpha, rate, bound)
        return rate

    def test_small_k(self):
        pool = CombinerPool(B=20_000, seed=12)
        for method in ('fe', 'fecs'):
            self.check_size(method, 5, 0.05, 10_000, pool)

    @unittest.skipUnless(SLOW, 'set PCOMBINE_SLOW_TESTS to run')
    def test_all_k(self):
        pool = CombinerPool(B=100_000, seed=12)
        for K in (5, 10, 20, 50, 100):
            for alpha in (0.01, 0.05):
                for method in ('fe', 'fecs'):
                    self.check_size(method, K, alpha, 100_000, pool)


if __name__ == '__main__':
    unittest.main()
