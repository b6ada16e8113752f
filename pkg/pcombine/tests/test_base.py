#!/usr/bin/env python
# type: ignore
"""Combiners and their calibration."""
from __future__ import annotations

import math
import unittest
import warnings

import numpy as np

from pcombine.base import Combiner
from pcombine.base import CombinerPool
from pcombine.core import Calibration
from pcombine.core import Direction
from pcombine.core import validate
from pcombine.exceptions import DataError
from pcombine.exceptions import PCombineWarning
from pcombine.exceptions import ResourceGuardError
from pcombine.exceptions import UsageError


class TestCalibration(unittest.TestCase):

    def test_calibration_modes(self):
        assert Combiner('fisher', 2).calibration is Calibration.ANALYTIC
        assert Combiner('minp', 2).calibration is Calibration.ANALYTIC
        assert Combiner('fe', 2).calibration is Calibration.CAUCHY_APPROX
        assert Combiner('trunccauchy', 2).calibration is Calibration.CAUCHY_APPROX
        assert Combiner('afp', 2).calibration is Calibration.MONTE_CARLO
        assert Combiner('pearson', 2).calibration is Calibration.MONTE_CARLO
        mc = Combiner('fisher', 2, calibrate='mc')
        assert mc.calibration is Calibration.MONTE_CARLO
        assert 'MonteCarlo' in repr(mc)

    def test_invalid_arguments(self):
        with self.assertRaises(UsageError):
            Combiner('fisher', 0)
        with self.assertRaises(UsageError):
            Combiner('fisher', 2, calibrate='exact')
        with self.assertRaises(UsageError):
            Combiner('tfhard', 2)

    def test_direction(self):
        assert Combiner('minp', 3).direction is Direction.SMALL
        assert Combiner('afp', 3).direction is Direction.LARGE


class TestCombine(unittest.TestCase):

    def test_fisher(self):
        res = Combiner('fisher', 2).combine([0.1, 0.5])
        assert abs(res.statistic - 5.99146) < 1e-5, res.statistic
        assert abs(res.pvalue - 0.19979) < 1e-5, res.pvalue
        assert res.calibration is Calibration.ANALYTIC
        assert res.method == 'fisher'
        assert res.j_star is None

    def test_id_and_clamping(self):
        vec = validate([0.2, 0.4], id='g1')
        assert Combiner('stouffer', 2).combine(vec).id == 'g1'
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', PCombineWarning)
            res = Combiner('fisher', 2).combine([0.0, 0.5])
        assert res.clamped
        assert 0.0 <= res.pvalue < 1e-12

    def test_afp_reports_selection(self):
        res = Combiner('afp', 2, B=2000, seed=1).combine([0.5, 0.1])
        assert res.j_star == 1
        assert res.selected_weights == (0, 1)
        assert res.calibration is Calibration.MONTE_CARLO
        assert 0.0 < res.pvalue <= 1.0

    def test_afz_reports_selection(self):
        res = Combiner('afz', 3, B=2000, seed=1).combine([0.9, 0.001, 0.002])
        assert res.j_star == 2, res.j_star
        assert res.selected_weights == (0, 1, 1)

    def test_monte_carlo_fisher(self):
        B = 20_000
        res = Combiner('fisher', 2, B=B, seed=2, calibrate='mc').combine([0.1, 0.5])
        band = 4 * math.sqrt(0.19979 * 0.80021 / B) + 2.0 / (B + 1)
        assert abs(res.pvalue - 0.19979) < band, res.pvalue
        assert res.calibration is Calibration.MONTE_CARLO

    def test_truncated_fisher(self):
        comb = Combiner('tfhard(tau=0.05)', 3, B=5000, seed=3)
        assert comb.combine([0.5, 0.6, 0.9]).pvalue == 1.0
        strong = comb.combine([1e-6, 1e-5, 0.9]).pvalue
        assert strong == 1.0 / 5001, strong

    def test_matrix(self):
        comb = Combiner('stouffer', 3)
        p = np.array([[0.5, 0.5, 0.5], [0.01, 0.02, 0.03]])
        pv = comb.pvalues(p)
        assert pv.shape == (2,)
        assert abs(pv[0] - 0.5) < 1e-12
        assert comb.rejects(p, 0.05).tolist() == [False, True]
        assert comb.statistics(p).shape == (2,)

    def test_k_mismatch(self):
        comb = Combiner('fisher', 3)
        with self.assertRaises(UsageError):
            comb.pvalues([[0.1, 0.2]])
        with self.assertRaises(UsageError):
            comb.combine([0.1, 0.2])
        with self.assertRaises(DataError):
            comb.pvalues([[0.1, 0.2, float('nan')]])

    def test_omnibus_all_ones(self):
        comb = Combiner('otfhard', 2, B=1000, seed=4)
        res = comb.combine([1.0, 1.0])
        assert res.statistic == 1.0
        assert res.pvalue == 1.0
        assert len(comb.omnibus_tables) == 4


class TestOneSided(unittest.TestCase):

    def test_pearson_single_study(self):
        B = 10_000
        comb = Combiner('pearson', 1, B=B, seed=5)
        res = comb.combine([0.5], left=[[0.01]])
        assert math.isclose(res.statistic, 0.01, rel_tol=1e-12)
        band = 4 * math.sqrt(0.02 * 0.98 / B) + 2.0 / (B + 1)
        assert abs(res.pvalue - 0.02) < band, res.pvalue

    def test_left_defaults_to_p(self):
        comb = Combiner('pearson', 2, B=2000, seed=5)
        p = np.array([[0.01, 0.2], [0.6, 0.7]])
        assert np.array_equal(comb.statistics(p), comb.statistics(p, left=p))

    def test_left_shape(self):
        comb = Combiner('fecs', 2, B=2000, seed=5)
        with self.assertRaises(UsageError):
            comb.pvalues([[0.1, 0.2]], left=[[0.1, 0.2], [0.3, 0.4]])

    def test_fecs_symmetric_point(self):
        comb = Combiner('fecs', 1, B=10_000, seed=6)
        res = comb.combine([0.5], left=[[0.5]])
        assert abs(res.pvalue - 0.5) < 0.05, res.pvalue
        assert res.calibration is Calibration.CAUCHY_APPROX

    def test_fecs_concordant_signal(self):
        comb = Combiner('fecs', 3, B=2000, seed=6)
        up = comb.combine([0.5] * 3, left=[[1e-4, 1e-3, 1e-2]]).pvalue
        down = comb.combine([0.5] * 3, left=[[1 - 1e-4, 1 - 1e-3, 1 - 1e-2]]).pvalue
        mixed = comb.combine([0.5] * 3, left=[[1e-4, 1 - 1e-3, 0.5]]).pvalue
        assert up < 0.01, up
        assert down < 0.01, down
        assert mixed > up, (mixed, up)


class TestCriticalValues(unittest.TestCase):

    def test_analytic(self):
        assert abs(Combiner('fisher', 2).critical_value(0.05) - 9.4877) < 1e-4
        assert abs(Combiner('stouffer', 4).critical_value(0.05) - 3.28971) < 1e-4
        assert abs(Combiner('minp', 5).critical_value(0.05) - 0.0102062) < 1e-6
        assert abs(Combiner('cauchy', 5).critical_value(0.05) - 6.31375) < 1e-4
        assert abs(Combiner('fe', 5).critical_value(0.05) - 6.31375) < 1e-4

    def test_monte_carlo_guard(self):
        comb = Combiner('tfhard(tau=0.05)', 2, B=1000, seed=1)
        with self.assertRaises(ResourceGuardError):
            comb.critical_value(0.05)
        with self.assertRaises(UsageError):
            comb.critical_value(1.5)

    def test_monte_carlo_fisher(self):
        comb = Combiner('fisher', 2, B=50_000, seed=7, calibrate='mc')
        crit = comb.critical_value(0.05)
        assert abs(crit - 9.4877) < 0.25, crit


class TestPool(unittest.TestCase):

    def test_memoized(self):
        pool = CombinerPool(B=2000, seed=3)
        a = pool.get('afp', 3)
        assert pool.get('AFP', 3) is a
        assert pool.get('afp', 4) is not a
        assert pool.get('afp', 3, calibrate='mc') is not a
        assert ('afp', 3, 'auto') in pool.keys()

    def test_constituents_are_shared(self):
        pool = CombinerPool(B=2000, seed=3)
        fe = pool.get('fe', 3)
        fecs = pool.get('fecs', 3)
        assert fe.constituents[1] is pool.get('afp', 3)
        assert fecs.constituents[1] is fe.constituents[1]
        fe.pvalues([[0.01, 0.2, 0.5]])
        fecs.pvalues([[0.01, 0.2, 0.5]])
        assert pool.cache.loaded() == [('afp', 3, 2000, 3)]

    def test_forced_monte_carlo_keeps_constituents_automatic(self):
        pool = CombinerPool(B=2000, seed=3, calibrate='mc')
        fe = pool.get('fe', 2)
        assert fe.calibration is Calibration.MONTE_CARLO
        assert fe.constituents[0].calibration is Calibration.ANALYTIC


if __name__ == '__main__':
    unittest.main()
