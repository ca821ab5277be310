"""
Online AUC maximization with a small buffer
===========================================

A two-class Gaussian task, a single pass of projected online subgradient
descent, and a held-out AUC for several buffer sizes. The batch optimum of
the all-pairs objective is the yardstick for both AUC and regret.
"""

import numpy as np

from pairstream.core import make_stream
from pairstream.data import SplitSpec, normalize_features, split, synth_gaussian
from pairstream.evaluation import auc_score, online_to_batch_report, regret_report
from pairstream.learners import LearnerConfig, average_hypothesis, batch_all_pairs_minimizer, olp_run
from pairstream.losses import PairwiseLoss
from pairstream.rng import RandomSource

rng = RandomSource(7)
data = normalize_features(synth_gaussian(1000, 1000, 10, 3.0, rng.spawn(0)))
train, test = split(data, SplitSpec(0.5, 20000), rng.spawn(1))
stream = make_stream(train, rng.spawn(2))
loss = PairwiseLoss("auc")
print("stream of", len(stream), "points, test set of", len(test))

# batch reference: approximate minimizer of the all-pairs objective
ref = batch_all_pairs_minimizer(stream, loss, radius=1.0, iterations=200)
print(f"batch AUC            {auc_score(ref, test):.4f}")

for s in [4, 16, 64, 256]:
    cfg = LearnerConfig(eta=1.0, buffer_capacity=s, policy="RSX", radius=1.0, loss=loss)
    trace = olp_run(stream, cfg, rng.spawn(100 + s))
    rep = regret_report(trace, stream, loss, ref, s)
    risk = online_to_batch_report(trace, test, loss)
    print(f"s={s:<4d} AUC {auc_score(average_hypothesis(trace), test):.4f}"
          f"  regret/step {rep.per_step_all_pairs:+.4f}"
          f"  risk(avg h) {risk['avgHypRisk']:.4f} <= mean risk {risk['ensembleAvgRisk']:.4f}")

# the averaged hypothesis is never worse than the ensemble on a convex loss;
# larger buffers approach the batch solution
norms = np.linalg.norm(trace.hypotheses, axis=1)
print("hypothesis norms stay inside the unit ball:", norms.max() <= 1.0 + 1e-12)
