#!/usr/bin/env python
# type: ignore
"""P-value validation, method specifications and input files."""
from __future__ import annotations

import os
import tempfile
import unittest
import warnings

import numpy as np

from pcombine.core import CLAMP_FLOOR
from pcombine.core import Calibration
from pcombine.core import CombineResult
from pcombine.core import Direction
from pcombine.core import Method
from pcombine.core import MethodSpec
from pcombine.core import parse_method_list
from pcombine.core import parse_method_spec
from pcombine.core import PValueVector
from pcombine.core import read_pvalue_matrix
from pcombine.core import SignedAssociation
from pcombine.core import split_method_list
from pcombine.core import validate
from pcombine.core import validate_matrix
from pcombine.exceptions import DataError
from pcombine.exceptions import PCombineWarning
from pcombine.exceptions import UsageError


class TestValidate(unittest.TestCase):

    def test_passthrough(self):
        vec = validate([0.1, 0.5, 1.0], id='g1')
        assert vec.values == (0.1, 0.5, 1.0), vec.values
        assert vec.K == 3
        assert vec.id == 'g1'
        assert vec.clamped is False

    def test_zero_is_clamped_with_warning(self):
        with self.assertWarns(PCombineWarning):
            vec = validate([0.0, 0.5])
        assert vec.values[0] == CLAMP_FLOOR, vec.values
        assert vec.values[1] == 0.5
        assert vec.clamped is True

    def test_idempotent(self):
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', PCombineWarning)
            once = validate([0.0, 0.2, 0.9], id='x')
        twice = validate(once)
        assert once == twice, (once, twice)

    def test_invalid_vectors(self):
        with self.assertRaises(DataError):
            validate([0.1, 1.2])
        with self.assertRaises(DataError):
            validate([-0.1])
        with self.assertRaises(DataError):
            validate([0.1, float('nan')])
        with self.assertRaises(DataError):
            validate([])
        with self.assertRaises(DataError):
            validate([[0.1, 0.2]])
        with self.assertRaises(DataError):
            validate(['a', 'b'])

    def test_matrix(self):
        arr = validate_matrix([[0.1, 0.2], [0.3, 0.4]])
        assert arr.shape == (2, 2)
        with self.assertRaises(DataError):
            validate_matrix([[0.1, 2.0]])
        with self.assertWarns(PCombineWarning):
            arr = validate_matrix([[0.0, 0.2]])
        assert arr[0, 0] == CLAMP_FLOOR

    def test_array_is_read_only(self):
        vec = PValueVector((0.1, 0.2))
        with self.assertRaises(ValueError):
            vec.array[0] = 0.5


class TestMethodSpec(unittest.TestCase):

    def test_bare_names_and_aliases(self):
        assert parse_method_spec('fisher').method is Method.FISHER
        assert parse_method_spec('FISHER').method is Method.FISHER
        assert parse_method_spec('hm').method is Method.HARMONIC_MEAN
        assert parse_method_spec('fe_cs').method is Method.FECS
        assert parse_method_spec('ca').method is Method.CAUCHY
        with self.assertRaises(UsageError):
            parse_method_spec('nosuchmethod')

    def test_keys(self):
        assert parse_method_spec('fisher').key == 'fisher'
        assert parse_method_spec('tfhard(tau=0.05)').key == 'tfhard(tau=0.05)'
        assert parse_method_spec('trunccauchy').key == 'trunccauchy(delta=0.01)'
        assert parse_method_spec('paretorv(gamma=2)').key == 'paretorv(gamma=2.0)'
        spec = parse_method_spec('fe(constituents=fisher+afp+minp)')
        assert spec.constituents == (Method.FISHER, Method.AFP, Method.MINP)
        assert spec.key == 'fe(delta=0.01,constituents=fisher+afp+minp)', spec.key
        assert parse_method_spec(spec.key) == spec

    def test_tau(self):
        with self.assertRaises(UsageError):
            parse_method_spec('tfhard')
        with self.assertRaises(UsageError):
            parse_method_spec('tfsoft(tau=0)')
        with self.assertRaises(UsageError):
            parse_method_spec('tfsoft(tau=1.5)')
        assert parse_method_spec('tfhard', tau=0.1).tau == 0.1
        # Irrelevant parameters do not leak into the key
        assert parse_method_spec('fisher', tau=0.1).key == 'fisher'

    def test_overrides(self):
        spec = parse_method_spec('tfhard(tau=0.05)', tau=0.2)
        assert spec.tau == 0.2
        spec = parse_method_spec('tfhard(tau=0.05)', tau=None)
        assert spec.tau == 0.05
        spec = parse_method_spec(MethodSpec(Method.FE), delta=0.05)
        assert spec.delta == 0.05

    def test_tau_set(self):
        spec = parse_method_spec('otfhard(tau_set=0.01+0.5+1)')
        assert spec.tau_set == (0.01, 0.5, 1.0), spec.tau_set
        with self.assertRaises(UsageError):
            parse_method_spec('otfsoft(tau_set=0.5+0.1)')
        with self.assertRaises(UsageError):
            parse_method_spec('otfsoft(tau_set=0.5+0.5)')

    def test_ensembles(self):
        with self.assertRaises(UsageError):
            parse_method_spec('fe(constituents=fisher)')
        with self.assertRaises(UsageError):
            parse_method_spec('fe(constituents=fisher+tfhard)')
        with self.assertRaises(UsageError):
            parse_method_spec('fe(constituents=fisher+fe)')
        with self.assertRaises(UsageError):
            parse_method_spec('fe(delta=1.5)')

    def test_malformed(self):
        for text in ('fisher(', 'tfhard(tau)', 'tfhard(tau=abc)', 'fisher(alpha=1)'):
            with self.assertRaises(UsageError):
                parse_method_spec(text)

    def test_direction(self):
        assert parse_method_spec('fisher').direction is Direction.LARGE
        assert parse_method_spec('minp').direction is Direction.SMALL
        assert parse_method_spec('harmonicmean').direction is Direction.SMALL
        assert parse_method_spec('otfhard').direction is Direction.SMALL
        assert parse_method_spec('pearson').direction is Direction.SMALL
        assert parse_method_spec('fecs').is_one_sided
        assert not parse_method_spec('fe').is_one_sided

    def test_method_lists(self):
        items = split_method_list(
            'fisher, tfhard(tau=0.05),fe(delta=0.01,constituents=fisher+afp)',
        )
        assert items == [
            'fisher', 'tfhard(tau=0.05)', 'fe(delta=0.01,constituents=fisher+afp)',
        ], items
        specs = parse_method_list('fisher,afp,otfsoft')
        assert [s.method for s in specs] == [Method.FISHER, Method.AFP, Method.OTFSOFT]
        assert split_method_list(' , ') == []


class TestResults(unittest.TestCase):

    def test_combine_result_checks(self):
        res = CombineResult(
            statistic=1.0, pvalue=0.5, calibration=Calibration.ANALYTIC,
            selected_weights=(1, 0, 1), j_star=2,
        )
        assert res.pvalue == 0.5
        with self.assertRaises(DataError):
            CombineResult(statistic=1.0, pvalue=1.5, calibration=Calibration.ANALYTIC)
        with self.assertRaises(DataError):
            CombineResult(
                statistic=1.0, pvalue=0.5, calibration=Calibration.ANALYTIC,
                selected_weights=(1, 0), j_star=2,
            )

    def test_signed_association(self):
        assoc = SignedAssociation(beta_sign=-1, p_left=0.2, p_right=0.8, e_measure=-0.7)
        assert assoc.beta_sign == -1
        with self.assertRaises(DataError):
            SignedAssociation(beta_sign=0, p_left=0.5, p_right=0.5, e_measure=0.0)
        with self.assertRaises(DataError):
            SignedAssociation(beta_sign=1, p_left=0.2, p_right=0.7, e_measure=0.7)
        assoc = SignedAssociation(
            beta_sign=1, p_left=0.3, p_right=0.7 + 1e-12, e_measure=0.5,
        )
        assert assoc.p_right > 0.7


class TestReadMatrix(unittest.TestCase):

    def setUp(self):
        self.tmpdir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmpdir.cleanup()

    def write(self, text):
        path = os.path.join(self.tmpdir.name, 'p.csv')
        with open(path, 'w', encoding='utf-8') as outfile:
            outfile.write(text)
        return path

    def test_read(self):
        path = self.write('id,p1,p2\ng1,0.1,0.5\ng2,1,0.25\n')
        matrix = read_pvalue_matrix(path)
        assert matrix.ids == ['g1', 'g2'], matrix.ids
        assert matrix.columns == ['p1', 'p2']
        assert np.array_equal(matrix.values, [[0.1, 0.5], [1.0, 0.25]])
        rows = list(matrix.rows())
        assert rows[1].id == 'g2'
        assert rows[1].values == (1.0, 0.25)

    def test_non_numeric(self):
        path = self.write('id,p1,p2\ng1,0.1,abc\n')
        with self.assertRaises(DataError) as cm:
            read_pvalue_matrix(path)
        assert 'row 1' in str(cm.exception), cm.exception

    def test_missing(self):
        path = self.write('id,p1,p2\ng1,0.1,0.2\ng2,,0.3\n')
        with self.assertRaises(DataError) as cm:
            read_pvalue_matrix(path)
        assert 'row 2' in str(cm.exception), cm.exception

    def test_out_of_range(self):
        path = self.write('id,p1\ng1,1.5\n')
        with self.assertRaises(DataError):
            read_pvalue_matrix(path)

    def test_no_p_columns(self):
        path = self.write('id\ng1\n')
        with self.assertRaises(DataError):
            read_pvalue_matrix(path)

    def test_missing_file(self):
        with self.assertRaises(DataError):
            read_pvalue_matrix(os.path.join(self.tmpdir.name, 'absent.csv'))


if __name__ == '__main__':
    unittest.main()
