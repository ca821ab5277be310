"""
Mahalanobis metric learning from a stream
=========================================

The same learner with the metric hinge: pairs with equal labels should end
up closer than pairs with different labels. Only the first coordinate
carries class information, and the learned matrix puts its weight there.
"""

import numpy as np

from pairstream.core import make_stream
from pairstream.data import SplitSpec, normalize_features, split, synth_gaussian
from pairstream.evaluation import metric_pair_auc
from pairstream.learners import LearnerConfig, average_hypothesis, olp_run
from pairstream.losses import PairwiseLoss
from pairstream.rng import RandomSource

rng = RandomSource(3)
data = normalize_features(synth_gaussian(150, 150, 3, 3.0, rng.spawn(0)))
train, test = split(data, SplitSpec(0.6, 20000), rng.spawn(1))
stream = make_stream(train, rng.spawn(2))

loss = PairwiseLoss("metric", sigma=0.05)
trace = olp_run(stream, LearnerConfig(eta=0.5, buffer_capacity=16, loss=loss), rng.spawn(3))
W = average_hypothesis(trace).matrix()

np.set_printoptions(precision=3, suppress=True)
print("learned W:\n", W)
print("pair AUC, identity metric:", round(metric_pair_auc(np.eye(3).ravel(), test), 4))
print("pair AUC, learned metric: ", round(metric_pair_auc(W.ravel(), test), 4))
