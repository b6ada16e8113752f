#!/usr/bin/env python
# type: ignore
"""Combination statistics."""
from __future__ import annotations

import itertools
import math
import unittest

import numpy as np
from scipy import stats as sps

from pcombine import combiners
from pcombine.core import MethodSpec
from pcombine.core import parse_method_spec
from pcombine.exceptions import UsageError


class TestClassical(unittest.TestCase):

    def test_fisher(self):
        assert abs(combiners.fisher_stat([0.1, 0.5]) - 5.99146) < 1e-5
        assert combiners.fisher_stat([1.0, 1.0, 1.0]) == 0.0
        out = combiners.fisher_stat(np.array([[0.1, 0.5], [1.0, 1.0]]))
        assert out.shape == (2,)

    def test_stouffer(self):
        assert abs(combiners.stouffer_stat([0.0228, 0.5]) - 2.0) < 0.01
        assert abs(combiners.stouffer_stat([0.5, 0.5, 0.5])) < 1e-12
        assert math.isfinite(combiners.stouffer_stat([1.0, 1e-300]))

    def test_minp(self):
        assert combiners.minp_stat([0.3, 0.04, 0.9]) == 0.04

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        p = rng.uniform(size=6)
        q = p[rng.permutation(6)]
        for name in ('fisher', 'stouffer', 'minp', 'afp', 'afz', 'cauchy',
                     'harmonicmean', 'hc', 'bj', 'trunccauchy', 'paretorv'):
            spec = parse_method_spec(name)
            a = combiners.statistic(spec, p)
            b = combiners.statistic(spec, q)
            assert math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-12), (name, a, b)

    def test_monotonicity(self):
        base = np.array([0.2, 0.4, 0.6])
        smaller = np.array([0.05, 0.4, 0.6])
        for name in ('fisher', 'stouffer', 'afp', 'afz', 'tfhard(tau=0.05)',
                     'tfsoft(tau=0.3)', 'cauchy', 'trunccauchy', 'paretorv',
                     'hc', 'bj'):
            spec = parse_method_spec(name)
            moved = combiners.statistic(spec, smaller)
            orig = combiners.statistic(spec, base)
            assert moved >= orig, name
        for name in ('minp', 'harmonicmean'):
            spec = parse_method_spec(name)
            moved = combiners.statistic(spec, smaller)
            orig = combiners.statistic(spec, base)
            assert moved <= orig, name

    def test_monotone_in_each_coordinate(self):
        rng = np.random.default_rng(7)
        growing = ('fisher', 'stouffer', 'afp', 'afz', 'tfhard(tau=0.05)',
                   'tfhard(tau=0.5)', 'tfsoft(tau=0.05)', 'tfsoft(tau=0.5)',
                   'cauchy', 'hc', 'bj')
        for _ in range(200):
            p = rng.uniform(0.001, 0.999, size=5)
            q = p.copy()
            i = rng.integers(5)
            q[i] *= rng.uniform(0.01, 1.0)
            for name in growing:
                spec = parse_method_spec(name)
                a = combiners.statistic(spec, q)
                b = combiners.statistic(spec, p)
                assert a >= b - 1e-9 * max(1.0, abs(b)), (name, p, q)
            assert combiners.minp_stat(q) <= combiners.minp_stat(p)

    def test_composite_methods_rejected(self):
        for name in ('fe', 'fecs', 'pearson', 'otfhard'):
            with self.assertRaises(UsageError):
                combiners.statistic(parse_method_spec(name), [0.1, 0.2])


class TestAdaptiveFisher(unittest.TestCase):

    def test_single_p_value(self):
        stat, j, trace = combiners.afp_stat([0.3])
        assert j == 1
        assert math.isclose(stat, -math.log(0.3), rel_tol=1e-12)
        assert trace.ordered_p == (0.3,)

    def test_example(self):
        stat, j, trace = combiners.afp_stat([0.5, 0.1])
        assert j == 1, j
        assert math.isclose(stat, -math.log(0.1), rel_tol=1e-12), stat
        assert trace.order == (1, 0)
        assert trace.ordered_p == (0.1, 0.5)
        assert combiners.afp_selected_weights(trace, j) == (0, 1)
        with self.assertRaises(UsageError):
            combiners.afp_selected_weights(trace, 3)

    def test_all_small_selects_everything(self):
        stat, j, trace = combiners.afp_stat([0.01, 0.01, 0.01, 0.01])
        assert j == 4, trace.partial_stats
        assert combiners.afp_selected_weights(trace, j) == (1, 1, 1, 1)

    def test_brute_force_over_subsets(self):
        rng = np.random.default_rng(20240101)
        for K in (1, 2, 3, 5, 7):
            for _ in range(40):
                p = rng.uniform(size=K) ** rng.uniform(0.5, 4.0)
                best = -np.inf
                for w in itertools.product((0, 1), repeat=K):
                    w = np.array(w)
                    if not w.any():
                        continue
                    x = -2.0 * (w * np.log(p)).sum()
                    best = max(best, -sps.chi2.logsf(x, 2 * w.sum()))
                stat, _, _ = combiners.afp_stat(p)
                assert math.isclose(stat, best, rel_tol=1e-9), (p, stat, best)

    def test_vectorized_matches_single(self):
        rng = np.random.default_rng(3)
        p = rng.uniform(size=(20, 6))
        stats, js = combiners.afp_stats(p)
        for row, s, j in zip(p, stats, js):
            s1, j1, _ = combiners.afp_stat(row)
            assert math.isclose(s, s1, rel_tol=1e-12)
            assert j == j1
        weights = combiners.selected_weights_matrix(p, js)
        assert (weights.sum(axis=1) == js).all()

    def test_far_tail_is_finite(self):
        stat, j, _ = combiners.afp_stat([1e-300, 1e-300, 1e-300])
        assert math.isfinite(stat) and stat > 600, stat
        assert j == 3

    def test_matrix_input_rejected(self):
        with self.assertRaises(UsageError):
            combiners.afp_stat(np.array([[0.1, 0.2], [0.3, 0.4]]))


class TestAFz(unittest.TestCase):

    def test_weights(self):
        A, B = combiners.afz_weights(2)
        assert np.allclose(A, [1.5, 2.0])
        assert np.allclose(B, [math.sqrt(1.25), math.sqrt(2.0)])

    def test_examples(self):
        stat, j = combiners.afz_stat([0.1, 0.5])
        assert abs(stat - 0.71787) < 1e-5, stat
        assert j == 1
        stat, j = combiners.afz_stat([0.5])
        assert abs(stat - (math.log(2.0) - 1.0)) < 1e-12, stat

    def test_trace(self):
        trace = combiners.afz_trace([0.5, 0.1])
        assert trace.ordered_p == (0.1, 0.5)
        assert trace.order == (1, 0)
        assert abs(trace.partial_stats[0] - 0.71787) < 1e-5
        assert abs(trace.partial_stats[1] - 0.70409) < 1e-5
        stat, j = combiners.afz_stat([0.5, 0.1])
        assert stat == max(trace.partial_stats)
        assert combiners.afp_selected_weights(trace, j) == (0, 1)
        with self.assertRaises(UsageError):
            combiners.afz_trace(np.array([[0.1, 0.2], [0.3, 0.4]]))


class TestTruncatedFisher(unittest.TestCase):

    def test_hard(self):
        assert combiners.tfhard_stat([0.5, 0.9], 0.05) == 0.0
        x = combiners.tfhard_stat([0.01, 0.5], 0.05)
        assert math.isclose(x, -2 * math.log(0.01), rel_tol=1e-12)
        assert math.isclose(
            combiners.tfhard_stat([0.3, 0.7], 1.0), combiners.fisher_stat([0.3, 0.7]),
        )

    def test_soft(self):
        x = combiners.tfsoft_stat([0.01, 0.5], 0.05)
        assert math.isclose(x, 2 * math.log(5.0), rel_tol=1e-12), x
        assert combiners.tfsoft_stat([0.06], 0.05) == 0.0

    def test_ordering(self):
        rng = np.random.default_rng(5)
        p = rng.uniform(size=(500, 8))
        for tau in (0.01, 0.05, 0.5, 1.0):
            soft = combiners.tfsoft_stat(p, tau)
            hard = combiners.tfhard_stat(p, tau)
            fisher = combiners.fisher_stat(p)
            assert (soft <= hard + 1e-12).all()
            assert (hard <= fisher + 1e-12).all()


class TestCauchyFamily(unittest.TestCase):

    def test_cauchy(self):
        assert abs(combiners.cauchy_stat([0.01]) - 31.8205) < 1e-4
        assert abs(combiners.cauchy_stat([0.25, 0.75])) < 1e-12
        assert math.isfinite(combiners.cauchy_stat([1.0, 0.5]))

    def test_transform_precision(self):
        assert math.isclose(
            combiners.cauchy_transform(1e-10), 1.0 / (math.pi * 1e-10), rel_tol=1e-9,
        )

    def test_truncated(self):
        x = combiners.trunc_cauchy_transform(0.995, 0.01)
        assert abs(x + 31.8205) < 1e-4, x
        assert combiners.trunc_cauchy_transform(1.0, 0.01) == x
        single = combiners.trunc_cauchy_stat([0.01], 0.01)
        assert single == combiners.cauchy_transform(0.01)
        with self.assertRaises(UsageError):
            combiners.trunc_cauchy_transform(0.5, 0.0)

    def test_harmonic_mean(self):
        assert math.isclose(combiners.harmonic_mean_stat([0.1, 0.9]), 0.18, rel_tol=1e-12)
        assert math.isclose(combiners.harmonic_mean_stat([0.4]), 0.4)

    def test_pareto(self):
        assert math.isclose(combiners.pareto_rv_transform(0.1, 1.0), 10.0)
        assert math.isclose(combiners.pareto_rv_transform(0.25, 2.0), 2.0)
        assert math.isclose(combiners.pareto_rv_stat([0.01, 0.5], 1.0), 102.0)
        with self.assertRaises(UsageError):
            combiners.pareto_rv_transform(0.5, 0.0)


class TestGoodnessOfFit(unittest.TestCase):

    def test_hc(self):
        assert abs(combiners.hc_stat([0.25, 0.75]) - 0.81650) < 1e-5
        assert abs(combiners.hc_stat([0.5]) - 1.0) < 1e-12
        assert combiners.hc_stat([1.0, 1.0]) == -np.inf

    def test_bj(self):
        assert math.isclose(combiners.bj_stat([0.1]), math.log(10.0), rel_tol=1e-12)
        expected = 2 * (0.5 * math.log(0.5 / 0.05) + 0.5 * math.log(0.5 / 0.95))
        assert math.isclose(combiners.bj_stat([0.8, 0.05]), expected, rel_tol=1e-12)
        assert combiners.bj_stat([0.6, 1.0]) == 0.0
        assert combiners.bj_stat([0.5, 1.0]) == 0.0

    def test_spec_dispatch(self):
        spec = MethodSpec('tfhard', tau=0.05)
        assert combiners.statistic(spec, [0.01, 0.5]) == combiners.tfhard_stat(
            [0.01, 0.5], 0.05,
        )


if __name__ == '__main__':
    unittest.main()
