#!/usr/bin/env python
# type: ignore
"""Survival functions."""
from __future__ import annotations

import math
import unittest

import numpy as np
from scipy import stats as sps

from pcombine.exceptions import DataError
from pcombine.special import cauchy_isf
from pcombine.special import cauchy_sf
from pcombine.special import chi2_logsf
from pcombine.special import chi2_sf
from pcombine.special import even_chi2_logsf
from pcombine.special import norm_isf
from pcombine.special import norm_isf_log
from pcombine.special import norm_logsf
from pcombine.special import norm_sf


class TestChiSquare(unittest.TestCase):

    def test_values(self):
        assert chi2_sf(0.0, 4) == 1.0
        assert abs(chi2_sf(5.99146, 4) - 0.19979) < 1e-5, chi2_sf(5.99146, 4)
        for x in (0.5, 3.0, 20.0):
            assert math.isclose(chi2_sf(x, 2), math.exp(-x / 2), rel_tol=1e-12)
        x = np.array([1.0, 10.0, 50.0])
        assert np.allclose(chi2_sf(x, 7), sps.chi2.sf(x, 7), rtol=1e-10)

    def test_negative(self):
        with self.assertRaises(DataError):
            chi2_sf(-1.0, 2)
        with self.assertRaises(DataError):
            chi2_logsf(np.array([1.0, float('nan')]), 2)

    def test_log_scale(self):
        x = np.array([0.1, 5.0, 40.0, 200.0])
        assert np.allclose(chi2_logsf(x, 6), sps.chi2.logsf(x, 6), rtol=1e-8)

    def test_far_tail(self):
        # SF(x; 4) = exp(-x/2) (1 + x/2)
        x = 5000.0
        expected = -x / 2 + math.log1p(x / 2)
        assert math.isclose(chi2_logsf(x, 4), expected, rel_tol=1e-10), chi2_logsf(x, 4)
        assert math.isclose(even_chi2_logsf(x, 4), expected, rel_tol=1e-10)
        odd = chi2_logsf(5000.0, 5)
        assert math.isfinite(odd) and odd < -2400, odd

    def test_even_series_matches(self):
        x = np.array([0.5, 3.0, 30.0])
        for df in (2, 4, 10):
            assert np.allclose(
                even_chi2_logsf(x, df), np.log(chi2_sf(x, df)), rtol=1e-10,
            ), df
        with self.assertRaises(ValueError):
            even_chi2_logsf(1.0, 3)


class TestNormalCauchy(unittest.TestCase):

    def test_normal(self):
        assert abs(norm_sf(0.0) - 0.5) < 1e-15
        assert abs(norm_isf(0.0228) - 2.0) < 0.001, norm_isf(0.0228)
        assert abs(norm_isf_log(math.log(0.0228)) - norm_isf(0.0228)) < 1e-10
        assert math.isfinite(norm_logsf(50.0))
        assert norm_isf_log(-2000.0) > 60

    def test_cauchy(self):
        assert cauchy_sf(0.0) == 0.5
        assert abs(cauchy_sf(1.0) - 0.25) < 1e-15
        assert abs(cauchy_isf(cauchy_sf(3.0)) - 3.0) < 1e-9
        assert abs(cauchy_sf(-1e6) - 1.0) < 1e-6
        big = cauchy_sf(1e12)
        assert math.isclose(big, 1.0 / (math.pi * 1e12), rel_tol=1e-9), big


if __name__ == '__main__':
    unittest.main()
