"""OLP: projected online subgradient descent over a finite pair buffer.

At step ``t`` the learner holds ``w_{t-1}``, receives ``z_t``, records the
buffer penalty of ``w_{t-1}``, takes a step of size ``eta / sqrt(t)``
against the buffer-averaged subgradient, projects onto the radius-``R``
Euclidean ball and only then updates the buffer. Step 1 only admits
``z_1`` into the (empty) buffer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, Hypothesis, TaskKind, as_weights
from .losses import LossKind, PairwiseLoss, expected_risk, mean_pair_subgradient, pair_losses
from .rng import RandomSource
from .sampling import Buffer, Policy, update


def project_l2_ball(w, radius: float) -> np.ndarray:
    if radius <= 0:
        raise ValueError("projection radius must be positive")
    w = np.asarray(w, dtype=np.float64)
    norm = np.linalg.norm(w)
    if norm <= radius:
        return w
    return w * (radius / norm)


@dataclass
class LearnerConfig:
    eta: float = 1.0
    buffer_capacity: int = 64
    policy: Policy = Policy.RSX
    radius: float = 1.0
    loss: PairwiseLoss = field(default_factory=PairwiseLoss)
    record_snapshots: bool = True

    def __post_init__(self):
        self.policy = Policy.parse(self.policy)
        if self.eta <= 0 or self.radius <= 0 or self.buffer_capacity < 1:
            raise ValueError("eta, radius and buffer capacity must be positive")


def _task(loss: PairwiseLoss) -> TaskKind:
    return TaskKind.AUC_LINEAR if loss.kind is LossKind.AUC_HINGE else TaskKind.METRIC_MAHALANOBIS


@dataclass
class EnsembleTrace:
    """Hypotheses ``h_1 .. h_{n-1}`` with the penalty each incurred.

    Row ``t - 2`` of ``hypotheses`` is ``h_{t-1}``, the hypothesis played
    at step ``t``; ``snapshots[t - 2]`` holds the 0-based stream indices in
    the buffer at that step (duplicates included).
    """

    hypotheses: np.ndarray
    buffer_penalties: np.ndarray
    snapshots: list | None = None
    task: TaskKind = TaskKind.AUC_LINEAR

    def __len__(self) -> int:
        return len(self.hypotheses)

    def hypothesis(self, i: int) -> Hypothesis:
        return Hypothesis(self.hypotheses[i], self.task)


def olp_run(stream: Dataset, config: LearnerConfig, rng: RandomSource) -> EnsembleTrace:
    n = len(stream)
    if n < 2:
        raise ValueError("stream too short: need at least 2 points")
    loss = config.loss
    X, Y = stream.X, stream.y
    w = np.zeros(loss.weight_dimension(stream.dimension))
    buf = Buffer(config.buffer_capacity, config.policy)
    hyps = np.empty((n - 1, w.size))
    penalties = np.empty(n - 1)
    snapshots = [] if config.record_snapshots else None

    for t in range(1, n + 1):
        i = t - 1
        if t >= 2:
            idx = np.asarray(buf.slots, dtype=np.int64)
            hyps[t - 2] = w
            penalties[t - 2] = pair_losses(loss, w, X[i], Y[i], X[idx], Y[idx]).mean()
            if snapshots is not None:
                snapshots.append(idx)
            g = mean_pair_subgradient(loss, w, X[i], Y[i], X[idx], Y[idx])
            w = project_l2_ball(w - (config.eta / np.sqrt(t)) * g, config.radius)
        update(buf, i, t, rng)
    return EnsembleTrace(hyps, penalties, snapshots, _task(loss))


def average_hypothesis(trace: EnsembleTrace) -> Hypothesis:
    if len(trace) == 0:
        raise ValueError("empty trace")
    return Hypothesis(trace.hypotheses.mean(axis=0), trace.task)


def best_hypothesis(trace: EnsembleTrace, validation: Dataset, loss: PairwiseLoss) -> Hypothesis:
    """Trace member with the lowest validation risk; earliest wins ties."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    if len(validation) < 2:
        raise ValueError("validation set needs at least 2 points")
    risks = np.array([expected_risk(loss, w, validation) for w in trace.hypotheses])
    return trace.hypothesis(int(np.argmin(risks)))


# ---------------------------------------------------------------------------
# Batch reference for regret: minimize sum_{t>=2} of the all-pairs penalty.


def all_pairs_objective(loss: PairwiseLoss, h, stream: Dataset, with_gradient: bool = False):
    """``sum_{t=2}^n (1/(t-1)) sum_{tau<t} loss(h, z_t, z_tau)`` and optionally a subgradient."""
    w = as_weights(h)
    if loss.kind is LossKind.AUC_HINGE:
        return _AucObjective(stream)(loss, w, with_gradient)
    X, Y = stream.X, stream.y
    value, grad = 0.0, np.zeros_like(w)
    for t in range(2, len(stream) + 1):
        i = t - 1
        value += pair_losses(loss, w, X[i], Y[i], X[:i], Y[:i]).mean()
        if with_gradient:
            grad += mean_pair_subgradient(loss, w, X[i], Y[i], X[:i], Y[:i])
    return (value, grad) if with_gradient else value


class _AucObjective:
    """AUC form of the aggregate objective over cross-label pairs.

    Each cross-label pair (p, q) appears once, weighted by ``1/max(p, q)``
    (0-based indices, i.e. ``1/(t-1)`` for the later arrival ``t``), with
    margin ``score_p - score_q`` regardless of arrival order.
    """

    def __init__(self, stream: Dataset, cache_cells: int = 8_000_000, chunk_cells: int = 2_000_000):
        self.X = stream.X
        self.pos = np.flatnonzero(stream.y > 0)
        self.neg = np.flatnonzero(stream.y < 0)
        self.step = max(1, chunk_cells // max(1, len(self.neg)))
        self.weights = None
        if len(self.pos) * len(self.neg) <= cache_cells:
            self.weights = 1.0 / np.maximum.outer(self.pos, self.neg)

    def _blocks(self):
        if self.weights is not None:
            yield 0, len(self.pos), self.weights
            return
        for a in range(0, len(self.pos), self.step):
            b = min(a + self.step, len(self.pos))
            yield a, b, 1.0 / np.maximum.outer(self.pos[a:b], self.neg)

    def __call__(self, loss: PairwiseLoss, w: np.ndarray, with_gradient: bool = False):
        scores = self.X @ w
        sp, sn = scores[self.pos], scores[self.neg]
        value, weight_total = 0.0, 0.0
        row_coef = np.zeros(len(self.pos))
        col_coef = np.zeros(len(self.neg))
        for a, b, weights in self._blocks():
            slack = 1.0 - (sp[a:b, None] - sn[None, :])
            c = np.where(slack > 0, weights, 0.0)
            value += np.sum(c * slack)
            weight_total += weights.sum()
            if with_gradient:
                row_coef[a:b] = c.sum(axis=1)
                col_coef += c.sum(axis=0)
        value += loss.regularizer(w) * weight_total
        if not with_gradient:
            return value
        grad = (-(row_coef @ self.X[self.pos]) + col_coef @ self.X[self.neg]
                + loss.sigma * w * weight_total)
        return value, grad


def batch_all_pairs_minimizer(stream: Dataset, loss: PairwiseLoss, radius: float,
                              iterations: int = 500, step_scale: float | None = None) -> Hypothesis:
    """Approximate minimizer of :func:`all_pairs_objective` over the radius ball.

    Deterministic projected subgradient descent from ``w = 0`` along the
    normalized subgradient with step ``c / sqrt(k)`` (``c`` defaults to the
    radius); the best iterate seen, including the origin, is returned.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    c = radius if step_scale is None else step_scale
    if loss.kind is LossKind.AUC_HINGE:
        objective = _AucObjective(stream)
    else:
        def objective(loss, w, with_gradient=False):
            return all_pairs_objective(loss, w, stream, with_gradient)
    w = np.zeros(loss.weight_dimension(stream.dimension))
    best_w, best_val = w, np.inf
    for k in range(1, iterations + 1):
        val, g = objective(loss, w, with_gradient=True)
        if val < best_val:
            best_w, best_val = w, val
        gn = np.linalg.norm(g)
        if gn == 0.0:
            break
        w = project_l2_ball(w - (c / np.sqrt(k)) * g / gn, radius)
    val = objective(loss, w)
    if val < best_val:
        best_w = w
    return Hypothesis(best_w, _task(loss))
