"""
Closed-form capacity bounds against a Monte-Carlo estimate
==========================================================

The linear pairwise class on the unit L2 ball has Rademacher complexity at
most 2/sqrt(n) on unit-norm data. A direct simulation of the supremum shows
how much slack the closed form leaves.
"""

import numpy as np

from pairstream import bounds as bd
from pairstream.core import Dataset
from pairstream.data import normalize_features
from pairstream.rng import RandomSource

for table, (fn, variants, formulas) in bd.TABLES.items():
    inp = bd.BoundInputs(n=100, d=10, num_kernels=8)
    for v in variants:
        print(f"{table:7s}{v:11s}{formulas[v]:42s}{fn(v, inp):.4f}")

print()
for n in [25, 50, 100, 200]:
    X = np.random.default_rng(n).normal(size=(n, 5))
    sample = normalize_features(Dataset(X, np.ones(n)))
    est, se = bd.empirical_rademacher_mc(sample, 1.0, 20_000, RandomSource(n), return_stderr=True)
    closed = bd.auc_rademacher_bound("Lq-ball", bd.BoundInputs(n=n))
    print(f"n={n:<4d} estimate {est:.4f} +- {se:.4f}   bound {closed:.4f}   ratio {est / closed:.2f}")

# excess-risk guarantee of an ensemble with regret 10 over 100 steps
inp = bd.BoundInputs(n=101, B=1.0, delta=0.1, regret=10.0)
print("\nexcess risk bound:", round(bd.excess_risk_bound_rhs("bounded", inp, [0.2] * 100), 4))
