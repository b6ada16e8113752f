"""
Combine p-values for a single feature, then screen a small synthetic
meta-analysis with Fisher, adaptive Fisher and the directional ensemble.
Tables are built in memory with a modest Monte Carlo size.
"""
from __future__ import annotations

import pcombine
from pcombine import CombinerPool
from pcombine.metapipe import MetaAnalysis
from pcombine.metapipe import synth_studies


def main() -> None:
    p = [0.01, 0.20, 0.74, 0.03]
    for method in ('fisher', 'stouffer', 'cauchy'):
        res = pcombine.combine(p, method)
        print(f'{res.method:>10s}  statistic={res.statistic:9.4f}  p={res.pvalue:.4g}')

    pool = CombinerPool(B=5000, seed=1)
    res = pool.get('afp', len(p)).combine(p)
    print(f'{"afp":>10s}  statistic={res.statistic:9.4f}  p={res.pvalue:.4g}'
          f'  j*={res.j_star}')

    studies, truth = synth_studies(
        n_features=200, n_studies=5, subjects_per_study=20,
        signal_config='mixed', seed=7,
    )
    results = MetaAnalysis(['fisher', 'afp', 'fecs'], pool=pool).run(studies)
    frame = results.results_frame()
    hits = frame[frame['q_value'] < 0.05].groupby('method').size()
    print()
    print('discoveries at q < 0.05')
    print(hits.to_string())
    print()
    print('true signal features')
    print(truth['mode'].value_counts().to_string())


if __name__ == '__main__':
    main()
