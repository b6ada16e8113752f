#!/usr/bin/env python
"""Feature-by-study meta-analysis of regression p-values."""
from __future__ import annotations

import enum
import logging
import math
import os
import warnings
from dataclasses import dataclass
from dataclasses import field
from typing import Any
from typing import Dict
from typing import Iterable
from typing import List
from typing import NamedTuple
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
import pandas as pd
from scipy import stats as sps
from sqlalchemy import log
from statsmodels.stats.multitest import multipletests

from .base import CombinerPool
from .core import MethodSpec
from .core import parse_method_spec
from .core import SignedAssociation
from .exceptions import DataError
from .exceptions import PCombineWarning
from .exceptions import RegressionError
from .exceptions import UsageError
from .rng import block_generator
from .rng import Stream

logger = logging.getLogger(__name__)

#: Minimum subjects per study for a three-parameter regression
MIN_SUBJECTS = 4

RESULT_COLUMNS = ['feature_id', 'method', 'combined_p', 'q_value', 's_sign']
E_MATRIX_COLUMNS = ['feature_id', 'study_id', 'beta_sign', 'e_measure']
DESIGN_COLUMNS = ['study_id', 'subject_id', 'age', 'sex']
CATEGORY_COLUMNS = ['feature_id', 'method_a', 'method_b', 'category', 'direction']
TRUTH_COLUMNS = ['feature_id', 'mode', 'n_signal_studies', 'magnitude']


@dataclass
class ExpressionStudy:
    """
    One study: a features-by-subjects response matrix with age and sex.

    Parameters
    ----------
    study_id : str
        Study label
    feature_ids : list of str
        Row labels of ``response``
    subject_ids : list of str
        Column labels of ``response``
    response : ndarray
        Features-by-subjects matrix
    age : ndarray
        Per-subject age
    sex : ndarray
        Per-subject sex coded 0/1

    """

    study_id: str
    feature_ids: List[str]
    subject_ids: List[str]
    response: np.ndarray
    age: np.ndarray
    sex: np.ndarray

    def __post_init__(self) -> None:
        self.response = np.asarray(self.response, dtype=np.float64)
        self.age = np.asarray(self.age, dtype=np.float64)
        self.sex = np.asarray(self.sex, dtype=np.float64)
        n_features, m = self.response.shape
        if m < MIN_SUBJECTS:
            raise DataError(
                f'study {self.study_id}: {m} subjects; at least {MIN_SUBJECTS} required',
            )
        if len(self.feature_ids) != n_features or len(self.subject_ids) != m:
            raise DataError(f'study {self.study_id}: labels do not match the matrix')
        if self.age.shape != (m,) or self.sex.shape != (m,):
            raise DataError(
                f'study {self.study_id}: one age and sex per subject required',
            )
        if not np.isfinite(self.response).all():
            raise DataError(f'study {self.study_id}: response matrix has missing cells')
        if not (np.isfinite(self.age).all() and np.isfinite(self.sex).all()):
            raise DataError(f'study {self.study_id}: covariates have missing cells')
        if not np.isin(self.sex, (0.0, 1.0)).all():
            raise DataError(f'study {self.study_id}: sex must be coded 0/1')
        if len(set(self.feature_ids)) != n_features:
            raise DataError(f'study {self.study_id}: duplicate feature ids')

    @property
    def m(self) -> int:
        return self.response.shape[1]


class RegressionFit(NamedTuple):
    beta_age: Any
    se: Any
    t: Any
    p_two: Any
    p_left: Any
    p_right: Any


def design_matrix(age: np.ndarray, sex: np.ndarray) -> np.ndarray:
    """Design ``[1, age, sex]``; raises :class:`RegressionError` if rank deficient."""
    X = np.column_stack([np.ones(len(age)), age, sex]).astype(np.float64)
    if X.shape[0] <= 3 or np.linalg.matrix_rank(X) < 3:
        raise RegressionError('design matrix [1, age, sex] is rank deficient')
    return X


def _fit(Y: np.ndarray, X: np.ndarray) -> RegressionFit:
    m = X.shape[0]
    df = m - 3
    xtx_inv = np.linalg.inv(X.T @ X)
    coef = Y @ X @ xtx_inv
    resid = Y - coef @ X.T
    rss = (resid ** 2).sum(axis=1)
    centered = Y - Y.mean(axis=1, keepdims=True)
    tss = (centered ** 2).sum(axis=1)

    beta = coef[:, 1]
    se = np.sqrt(rss / df * xtx_inv[1, 1])
    constant = tss == 0.0
    exact = ~constant & (rss <= 1e-20 * tss)

    with np.errstate(divide='ignore', invalid='ignore'):
        t = beta / se
    beta = np.where(constant, 0.0, beta)
    se = np.where(constant | exact, 0.0, se)
    t = np.where(constant, 0.0, t)
    t = np.where(exact, np.copysign(np.inf, beta), t)

    p_left = sps.t.sf(t, df)
    p_right = sps.t.cdf(t, df)
    p_two = np.minimum(2.0 * np.minimum(p_left, p_right), 1.0)
    return RegressionFit(beta, se, t, p_two, p_left, p_right)


def fit_feature_regression(
    y: Sequence[float],
    age: Sequence[float],
    sex: Sequence[float],
) -> RegressionFit:
    """
    OLS fit of ``y ~ 1 + age + sex`` for one feature.

    Returns
    -------
    RegressionFit
        ``beta_age``, its standard error, ``t`` with ``m - 3`` degrees of
        freedom, the two-sided p-value, ``p_left = SF_t(t)`` and
        ``p_right = CDF_t(t)``

    """
    X = design_matrix(
        np.asarray(age, dtype=np.float64), np.asarray(sex, dtype=np.float64),
    )
    Y = np.asarray(y, dtype=np.float64)[None, :]
    if Y.shape[1] != X.shape[0]:
        raise DataError('response and covariates differ in length')
    fit = _fit(Y, X)
    return RegressionFit(*(float(np.asarray(v)[0]) for v in fit))


def fit_study(study: ExpressionStudy) -> RegressionFit:
    """Vectorized regression of every feature in a study."""
    X = design_matrix(study.age, study.sex)
    return _fit(study.response, X)


def bh_qvalues(pvalues: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    """Benjamini-Hochberg adjusted p-values in input order."""
    p = np.asarray(pvalues, dtype=np.float64)
    if p.size == 0:
        return p.copy()
    if np.isnan(p).any() or ((p < 0) | (p > 1)).any():
        raise DataError('q-values need p-values in [0, 1]')
    return np.asarray(multipletests(p, method='fdr_bh')[1], dtype=np.float64)


def association_measure(
    beta_sign: Union[int, np.ndarray],
    p_left: Union[float, np.ndarray],
    p_right: Union[float, np.ndarray],
) -> Union[float, np.ndarray]:
    """Signed ``-log10`` of the smaller one-sided p-value."""
    pmin = np.minimum(np.asarray(p_left, dtype=np.float64), p_right)
    with np.errstate(divide='ignore'):
        out = -np.sign(beta_sign) * np.log10(pmin) + 0.0
    if np.ndim(out) == 0:
        return float(out)
    return out


def signed_association(beta: float, p_left: float, p_right: float) -> SignedAssociation:
    beta_sign = -1 if beta < 0 else 1
    return SignedAssociation(
        beta_sign=beta_sign, p_left=float(p_left), p_right=float(p_right),
        e_measure=float(association_measure(beta_sign, p_left, p_right)),
    )


def sign_score(
    beta_signs: Union[Sequence[float], np.ndarray],
    p_min: Union[Sequence[float], np.ndarray],
    threshold: float = 0.05,
) -> Union[int, np.ndarray]:
    """
    Sum of the beta signs over studies with min one-sided p <= ``threshold``.

    A zero beta counts as +1, as in the E matrix.

    """
    signs = np.where(np.asarray(beta_signs, dtype=np.float64) < 0, -1, 1)
    passing = np.asarray(p_min, dtype=np.float64) <= threshold
    out = (signs * passing).sum(axis=-1).astype(np.int64)
    if np.ndim(out) == 0:
        return int(out)
    return out


def sign_direction(s_sign: int) -> str:
    """``positive`` when the sign score is positive, otherwise ``negative``."""
    return 'positive' if s_sign > 0 else 'negative'


class Category(str, enum.Enum):
    ONLY_A = 'OnlyA'
    BOTH = 'Both'
    ONLY_B = 'OnlyB'


def categorize_genes(
    qvalues: pd.DataFrame,
    method_a: str,
    method_b: str,
    q_cutoff: float = 0.05,
) -> Dict[str, Category]:
    """
    Partition features significant under at least one of two methods.

    Parameters
    ----------
    qvalues : DataFrame
        Indexed by feature id with one column of q-values per method key
    method_a, method_b : str
        Method keys to compare
    q_cutoff : float, optional
        Significance cutoff (inclusive)

    """
    a_key = parse_method_spec(method_a).key
    b_key = parse_method_spec(method_b).key
    for key in (a_key, b_key):
        if key not in qvalues.columns:
            raise UsageError(f'no q-values for method {key}')
    out: Dict[str, Category] = {}
    for fid, qa, qb in zip(qvalues.index, qvalues[a_key], qvalues[b_key]):
        sig_a, sig_b = qa <= q_cutoff, qb <= q_cutoff
        if sig_a and sig_b:
            out[str(fid)] = Category.BOTH
        elif sig_a:
            out[str(fid)] = Category.ONLY_A
        elif sig_b:
            out[str(fid)] = Category.ONLY_B
    return out


def combine_matrix(
    p_two: np.ndarray,
    p_left: np.ndarray,
    methods: Sequence[Union[MethodSpec, str]],
    pool: Optional[CombinerPool] = None,
) -> Dict[str, np.ndarray]:
    """
    Combined p-values of every feature (row) for each method.

    Two-sided methods combine ``p_two``; FE_CS and Pearson combine the left
    one-sided p-values, with the right ones taken as ``1 - p_left``.

    """
    p_two = np.atleast_2d(np.asarray(p_two, dtype=np.float64))
    p_left = np.atleast_2d(np.asarray(p_left, dtype=np.float64))
    if p_two.shape != p_left.shape:
        raise DataError('two-sided and one-sided p-value matrices differ in shape')
    if np.isnan(p_two).any() or np.isnan(p_left).any():
        raise DataError('a study is missing for at least one feature')
    pool = pool or CombinerPool()
    K = p_two.shape[1]
    out: Dict[str, np.ndarray] = {}
    for method in methods:
        combiner = pool.get(method, K)
        source = p_left if combiner.spec.is_one_sided else p_two
        out[combiner.spec.key] = combiner.pvalues(source)
    return out


def combine_feature(
    p_two: Sequence[float],
    p_left: Sequence[float],
    methods: Sequence[Union[MethodSpec, str]],
    pool: Optional[CombinerPool] = None,
) -> Dict[str, float]:
    """Combined p-value of one feature for each method."""
    res = combine_matrix(
        np.asarray(p_two, dtype=np.float64)[None, :],
        np.asarray(p_left, dtype=np.float64)[None, :],
        methods, pool,
    )
    return {k: float(v[0]) for k, v in res.items()}


@dataclass
class FeatureMetaResult:
    """Per-study regression summaries and combined results of one feature."""

    feature_id: str
    study_ids: Tuple[str, ...]
    beta_age: Tuple[float, ...]
    p_two: Tuple[float, ...]
    p_left: Tuple[float, ...]
    p_right: Tuple[float, ...]
    e_measure: Tuple[float, ...]
    combined_p: Dict[str, float] = field(default_factory=dict)
    q_value: Dict[str, float] = field(default_factory=dict)
    s_sign: int = 0

    def associations(self) -> List[SignedAssociation]:
        return [
            signed_association(b, pl, pr)
            for b, pl, pr in zip(self.beta_age, self.p_left, self.p_right)
        ]


@dataclass
class MetaResults:
    """Aligned outputs of a meta-analysis run, rows sorted by feature id."""

    feature_ids: List[str]
    study_ids: List[str]
    beta_age: np.ndarray
    p_two: np.ndarray
    p_left: np.ndarray
    p_right: np.ndarray
    e_measure: np.ndarray
    s_sign: np.ndarray
    combined_p: Dict[str, np.ndarray]
    q_value: Dict[str, np.ndarray]
    excluded: List[str] = field(default_factory=list)

    @property
    def methods(self) -> List[str]:
        return list(self.combined_p)

    def feature(self, feature_id: str) -> FeatureMetaResult:
        try:
            i = self.feature_ids.index(feature_id)
        except ValueError:
            raise KeyError(feature_id)
        return FeatureMetaResult(
            feature_id=feature_id,
            study_ids=tuple(self.study_ids),
            beta_age=tuple(float(x) for x in self.beta_age[i]),
            p_two=tuple(float(x) for x in self.p_two[i]),
            p_left=tuple(float(x) for x in self.p_left[i]),
            p_right=tuple(float(x) for x in self.p_right[i]),
            e_measure=tuple(float(x) for x in self.e_measure[i]),
            combined_p={k: float(v[i]) for k, v in self.combined_p.items()},
            q_value={k: float(v[i]) for k, v in self.q_value.items()},
            s_sign=int(self.s_sign[i]),
        )

    def results_frame(self) -> pd.DataFrame:
        """Long format ``feature_id,method,combined_p,q_value,s_sign``."""
        frames = []
        for method in self.methods:
            frames.append(pd.DataFrame(dict(
                feature_id=self.feature_ids, method=method,
                combined_p=self.combined_p[method], q_value=self.q_value[method],
                s_sign=self.s_sign,
            )))
        if not frames:
            return pd.DataFrame(columns=RESULT_COLUMNS)
        out = pd.concat(frames, ignore_index=True)
        out = out.sort_values(['feature_id', 'method'], kind='stable')
        return out.reset_index(drop=True)

    def e_matrix_frame(self) -> pd.DataFrame:
        """Long format ``feature_id,study_id,beta_sign,e_measure``."""
        n, K = self.e_measure.shape
        return pd.DataFrame(dict(
            feature_id=np.repeat(self.feature_ids, K),
            study_id=np.tile(self.study_ids, n),
            beta_sign=np.where(self.beta_age < 0, -1, 1).reshape(-1),
            e_measure=self.e_measure.reshape(-1),
        ), columns=E_MATRIX_COLUMNS)

    def qvalue_frame(self) -> pd.DataFrame:
        index = pd.Index(self.feature_ids, name='feature_id')
        return pd.DataFrame(self.q_value, index=index)

    def categories_frame(
        self,
        method_a: str,
        method_b: str,
        q_cutoff: float = 0.05,
    ) -> pd.DataFrame:
        cats = categorize_genes(self.qvalue_frame(), method_a, method_b, q_cutoff)
        index = {fid: i for i, fid in enumerate(self.feature_ids)}
        a_key = parse_method_spec(method_a).key
        b_key = parse_method_spec(method_b).key
        rows = [
            dict(
                feature_id=fid, method_a=a_key, method_b=b_key, category=cat.value,
                direction=sign_direction(int(self.s_sign[index[fid]])),
            )
            for fid, cat in sorted(cats.items())
        ]
        return pd.DataFrame(rows, columns=CATEGORY_COLUMNS)


@log.class_logger
class MetaAnalysis(object):
    """
    Regression, combination and q-value screening across studies.

    Parameters
    ----------
    methods : sequence of MethodSpecs or str
        Combination methods
    pool : CombinerPool, optional
        Source of combiners and null tables
    sign_threshold : float, optional
        One-sided p-value threshold of the sign score

    """

    logger: Any

    def __init__(
        self,
        methods: Sequence[Union[MethodSpec, str]],
        pool: Optional[CombinerPool] = None,
        sign_threshold: float = 0.05,
    ) -> None:
        self.methods = [parse_method_spec(m) for m in methods]
        if not self.methods:
            raise UsageError('at least one combination method is required')
        self.pool = pool or CombinerPool()
        self.sign_threshold = sign_threshold

    def _fit_all(
        self,
        studies: Sequence[ExpressionStudy],
        features: List[str],
    ) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
        n, K = len(features), len(studies)
        arrays = {
            name: np.full((n, K), np.nan)
            for name in ('beta_age', 'p_two', 'p_left', 'p_right')
        }
        failed = np.zeros(n, dtype=bool)
        for k, study in enumerate(studies):
            rows = pd.Index(study.feature_ids).get_indexer(features)
            try:
                fit = fit_study(study)
            except RegressionError as exc:
                self.logger.error(
                    'study %s: %s; its features are skipped', study.study_id, exc,
                )
                failed[:] = True
                continue
            for name in arrays:
                arrays[name][:, k] = np.asarray(getattr(fit, name))[rows]
            bad = ~np.isfinite(arrays['p_two'][:, k])
            if bad.any():
                for fid in np.asarray(features)[bad]:
                    self.logger.warning(
                        'feature %s failed to fit in study %s', fid, study.study_id,
                    )
                failed |= bad
        return arrays, failed

    def run(self, studies: Sequence[ExpressionStudy]) -> MetaResults:
        """
        Fit, combine and adjust.

        Only features present and successfully fit in every study are
        combined; the rest are reported in ``MetaResults.excluded``.

        """
        if not studies:
            raise DataError('no studies supplied')
        ids = [s.study_id for s in studies]
        if len(set(ids)) != len(ids):
            raise DataError('duplicate study ids')

        universe = sorted(set().union(*(s.feature_ids for s in studies)))
        common = set(studies[0].feature_ids)
        for s in studies[1:]:
            common &= set(s.feature_ids)
        features = sorted(common)
        excluded = [f for f in universe if f not in common]
        if excluded:
            warnings.warn(
                f'{len(excluded)} feature(s) missing from at least one study '
                'were excluded',
                PCombineWarning,
            )

        arrays, failed = self._fit_all(studies, features)
        if failed.any():
            keep = ~failed
            excluded = sorted(excluded + [f for f, bad in zip(features, failed) if bad])
            features = [f for f, ok in zip(features, keep) if ok]
            arrays = {k: v[keep] for k, v in arrays.items()}
            warnings.warn(
                f'{int(failed.sum())} feature(s) failed regression and were excluded',
                PCombineWarning,
            )
        self.logger.info(
            'combining %d features across %d studies with %s',
            len(features), len(studies), ', '.join(m.key for m in self.methods),
        )

        beta_sign = np.where(arrays['beta_age'] < 0, -1, 1)
        e = np.asarray(
            association_measure(beta_sign, arrays['p_left'], arrays['p_right']),
        )
        p_min = np.minimum(arrays['p_left'], arrays['p_right'])
        s_sign = np.asarray(
            sign_score(beta_sign, p_min, self.sign_threshold),
            dtype=np.int64,
        ).reshape(len(features))

        if features:
            combined = combine_matrix(
                arrays['p_two'], arrays['p_left'], self.methods, self.pool,
            )
        else:
            combined = {m.key: np.zeros(0) for m in self.methods}
        qvalues = {k: bh_qvalues(v) for k, v in combined.items()}

        return MetaResults(
            feature_ids=features,
            study_ids=ids,
            beta_age=arrays['beta_age'],
            p_two=arrays['p_two'],
            p_left=arrays['p_left'],
            p_right=arrays['p_right'],
            e_measure=e.reshape(len(features), len(studies)),
            s_sign=s_sign,
            combined_p=combined,
            q_value=qvalues,
            excluded=excluded,
        )


def default_comparisons(
    methods: Iterable[Union[MethodSpec, str]],
) -> List[Tuple[str, str]]:
    """Method pairs compared in ``categories.csv`` when none are requested."""
    keys = [parse_method_spec(m).key for m in methods]
    pairs = []
    for a, b in (('fisher', 'afp'), ('fe', 'fecs')):
        if a in keys and b in keys:
            pairs.append((a, b))
    return pairs


def write_results(
    results: MetaResults,
    out_dir: str,
    comparisons: Optional[Sequence[Tuple[str, str]]] = None,
    q_cutoff: float = 0.05,
) -> List[str]:
    """Write the results, e-matrix and categories CSVs; return their paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    path = os.path.join(out_dir, 'results.csv')
    results.results_frame().to_csv(path, index=False, float_format='%.10g')
    paths.append(path)
    path = os.path.join(out_dir, 'e_matrix.csv')
    results.e_matrix_frame().to_csv(path, index=False, float_format='%.10g')
    paths.append(path)
    if comparisons is None:
        comparisons = default_comparisons(results.methods)
    if comparisons:
        frames = [results.categories_frame(a, b, q_cutoff) for a, b in comparisons]
        path = os.path.join(out_dir, 'categories.csv')
        pd.concat(frames, ignore_index=True).to_csv(path, index=False)
        paths.append(path)
    return paths


#
# Study files
#


def read_studies(expr_dir: str, design_path: str) -> List[ExpressionStudy]:
    """
    Read per-study expression CSVs and the shared design CSV.

    ``design_path`` has columns ``study_id,subject_id,age,sex``; each study's
    matrix is ``<expr_dir>/<study_id>.csv`` with a ``feature_id`` column and
    one column per subject.

    """
    try:
        design = pd.read_csv(design_path, dtype={'study_id': str, 'subject_id': str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f'could not read design {design_path}: {exc}') from exc
    missing = [c for c in DESIGN_COLUMNS if c not in design.columns]
    if missing:
        raise DataError(f'{design_path}: missing columns {", ".join(missing)}')
    if design[DESIGN_COLUMNS].isna().any(axis=None):
        raise DataError(f'{design_path}: missing cells')

    studies = []
    for study_id, rows in design.groupby('study_id', sort=True):
        path = os.path.join(expr_dir, f'{study_id}.csv')
        try:
            expr = pd.read_csv(path, dtype={'feature_id': str})
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
            raise DataError(
                f'could not read study {study_id} from {path}: {exc}',
            ) from exc
        if 'feature_id' not in expr.columns:
            raise DataError(f'{path}: missing feature_id column')
        subjects = rows['subject_id'].tolist()
        absent = [s for s in subjects if s not in expr.columns]
        if absent:
            raise DataError(f'{path}: no column for subject(s) {", ".join(absent[:5])}')
        body = expr[subjects].apply(pd.to_numeric, errors='coerce')
        if body.isna().any(axis=None):
            raise DataError(f'{path}: missing or non-numeric cells')
        studies.append(ExpressionStudy(
            study_id=str(study_id),
            feature_ids=expr['feature_id'].astype(str).tolist(),
            subject_ids=subjects,
            response=body.to_numpy(dtype=np.float64),
            age=rows['age'].to_numpy(dtype=np.float64),
            sex=rows['sex'].to_numpy(dtype=np.float64),
        ))
        logger.debug('read study %s: %d features, %d subjects', study_id, *body.shape)
    return studies


def write_studies(studies: Sequence[ExpressionStudy], out_dir: str) -> List[str]:
    """Write studies in the layout read by :func:`read_studies`."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    design = []
    for study in studies:
        df = pd.DataFrame(study.response, columns=study.subject_ids)
        df.insert(0, 'feature_id', study.feature_ids)
        path = os.path.join(out_dir, f'{study.study_id}.csv')
        df.to_csv(path, index=False, float_format='%.10g')
        paths.append(path)
        design.append(pd.DataFrame(dict(
            study_id=study.study_id, subject_id=study.subject_ids,
            age=study.age, sex=study.sex.astype(int),
        )))
    path = os.path.join(out_dir, 'design.csv')
    pd.concat(design, ignore_index=True).to_csv(
        path, index=False, columns=DESIGN_COLUMNS, float_format='%.10g',
    )
    paths.append(path)
    return paths


#
# Synthetic data
#


class SignalMode(str, enum.Enum):
    NULL = 'null'
    CONCORDANT_POS = 'concordant+'
    CONCORDANT_NEG = 'concordant-'
    DISCORDANT = 'discordant'


@dataclass(frozen=True)
class SignalConfig:
    """
    Mix of synthetic feature types.

    Parameters
    ----------
    concordant_pos, concordant_neg, discordant : float
        Fractions of features of each signal mode; the rest are null
    study_fraction : float
        Fraction of studies in which a signal feature has a nonzero age effect
    magnitude : float
        Age effect in noise standard deviations per age standard deviation

    """

    concordant_pos: float = 0.0
    concordant_neg: float = 0.0
    discordant: float = 0.0
    study_fraction: float = 1.0
    magnitude: float = 1.0

    def __post_init__(self) -> None:
        fracs = (self.concordant_pos, self.concordant_neg, self.discordant)
        if any(f < 0 for f in fracs) or sum(fracs) > 1.0 + 1e-12:
            raise UsageError('signal fractions must be non-negative and sum to at most 1')
        if not 0.0 < self.study_fraction <= 1.0:
            raise UsageError(f'study_fraction must be in (0, 1]: {self.study_fraction}')
        if self.magnitude < 0:
            raise UsageError('magnitude must be non-negative')


SYNTH_PRESETS: Dict[str, SignalConfig] = {
    'null': SignalConfig(),
    'concordant': SignalConfig(concordant_pos=0.2, concordant_neg=0.2),
    'discordant': SignalConfig(discordant=0.4),
    'mixed': SignalConfig(
        concordant_pos=0.1, concordant_neg=0.1, discordant=0.1, study_fraction=0.5,
    ),
}

AGE_RANGE = (20.0, 80.0)
SEX_EFFECT = 0.3


def _modes(n_features: int, config: SignalConfig) -> List[SignalMode]:
    counts = [
        (SignalMode.CONCORDANT_POS, config.concordant_pos),
        (SignalMode.CONCORDANT_NEG, config.concordant_neg),
        (SignalMode.DISCORDANT, config.discordant),
    ]
    modes: List[SignalMode] = []
    for mode, frac in counts:
        modes.extend([mode] * int(round(frac * n_features)))
    modes = modes[:n_features]
    modes.extend([SignalMode.NULL] * (n_features - len(modes)))
    return modes


def synth_studies(
    n_features: int = 500,
    n_studies: int = 8,
    subjects_per_study: int = 20,
    signal_config: Union[SignalConfig, str] = 'concordant',
    seed: int = 0,
) -> Tuple[List[ExpressionStudy], pd.DataFrame]:
    """
    Simulate studies following ``y = b0 + b_age age + b_sex sex + noise``.

    Returns
    -------
    (studies, truth)
        ``truth`` has columns ``feature_id,mode,n_signal_studies,magnitude``

    """
    if isinstance(signal_config, str):
        try:
            config = SYNTH_PRESETS[signal_config.lower()]
        except KeyError:
            raise UsageError(
                f'unknown synth preset {signal_config!r}; '
                f'choose from {", ".join(sorted(SYNTH_PRESETS))}',
            )
    else:
        config = signal_config
    if n_features < 1 or n_studies < 1:
        raise UsageError('n_features and n_studies must be positive')
    if subjects_per_study < MIN_SUBJECTS:
        raise UsageError(f'subjects_per_study must be at least {MIN_SUBJECTS}')

    feature_ids = ['g%05d' % i for i in range(n_features)]
    gen = block_generator(seed, Stream.SYNTHETIC, 0)
    modes = _modes(n_features, config)
    modes = [modes[i] for i in gen.permutation(n_features)]

    n_signal = max(1, int(round(config.study_fraction * n_studies)))
    effects = np.zeros((n_features, n_studies))
    n_active = np.zeros(n_features, dtype=int)
    age_sd = (AGE_RANGE[1] - AGE_RANGE[0]) / math.sqrt(12.0)
    beta = config.magnitude / age_sd
    for i, mode in enumerate(modes):
        if mode is SignalMode.NULL or config.magnitude == 0:
            continue
        active = np.sort(gen.choice(n_studies, size=n_signal, replace=False))
        if mode is SignalMode.CONCORDANT_POS:
            signs = np.ones(n_signal)
        elif mode is SignalMode.CONCORDANT_NEG:
            signs = -np.ones(n_signal)
        else:
            signs = np.where(np.arange(n_signal) % 2 == 0, 1.0, -1.0)
        effects[i, active] = beta * signs
        n_active[i] = n_signal

    studies = []
    for k in range(n_studies):
        sgen = block_generator(seed, Stream.SYNTHETIC, k + 1)
        m = subjects_per_study
        age = np.round(sgen.uniform(AGE_RANGE[0], AGE_RANGE[1], m), 1)
        sex = np.zeros(m)
        sex[sgen.permutation(m)[:m // 2]] = 1.0
        noise = sgen.standard_normal((n_features, m))
        response = 5.0 + effects[:, k:k + 1] * age[None, :] + SEX_EFFECT * sex + noise
        study_id = 's%02d' % k
        studies.append(ExpressionStudy(
            study_id=study_id,
            feature_ids=list(feature_ids),
            subject_ids=['%s_%03d' % (study_id, j) for j in range(m)],
            response=response,
            age=age,
            sex=sex,
        ))

    truth = pd.DataFrame(dict(
        feature_id=feature_ids,
        mode=[m.value for m in modes],
        n_signal_studies=n_active,
        magnitude=[config.magnitude if m is not SignalMode.NULL else 0.0 for m in modes],
    ), columns=TRUTH_COLUMNS)
    logger.info(
        'synthesized %d features in %d studies (%s)',
        n_features, n_studies, truth['mode'].value_counts().to_dict(),
    )
    return studies, truth
