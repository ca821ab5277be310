"""Pairwise hinge losses, their subgradients and the penalty functionals.

Two loss families are supported, both built on the unit-margin hinge
``phi(u) = max(0, 1 - u)`` plus an optional ridge term ``(sigma/2)||w||^2``:

* ``auc``    -- ``phi(((y - y')/2) * w.(x - x'))`` for cross-label pairs;
  same-label pairs contribute exactly zero.
* ``metric`` -- ``phi(y y' (1 - M_W(x, x')))`` with the Mahalanobis form
  ``M_W(x, x') = (x - x')^T W (x - x')`` and ``W`` stored row-major.

At the hinge kink (margin exactly 1) the inactive branch is taken, so the
subgradient there is just the ridge gradient.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import Dataset, LabeledPoint, as_weights


class LossKind(str, Enum):
    AUC_HINGE = "auc"
    METRIC_HINGE = "metric"


@dataclass(frozen=True)
class PairwiseLoss:
    kind: LossKind = LossKind.AUC_HINGE
    sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        if self.sigma < 0:
            raise ValueError("regularization sigma must be nonnegative")

    def weight_dimension(self, d: int) -> int:
        return d if self.kind is LossKind.AUC_HINGE else d * d

    def regularizer(self, w) -> float:
        w = as_weights(w)
        return 0.5 * self.sigma * float(w @ w)


def _check_dims(loss: PairwiseLoss, w: np.ndarray, d: int) -> None:
    if w.size != loss.weight_dimension(d):
        raise ValueError(f"hypothesis has {w.size} weights, features need {loss.weight_dimension(d)}")


def pair_margins(loss: PairwiseLoss, w, x, y: float, X: np.ndarray, Y: np.ndarray):
    """Margins of the anchor ``(x, y)`` against each row of ``(X, Y)``.

    Returns ``(margins, active)`` where ``active`` marks pairs that carry
    loss at all (cross-label pairs for AUC; every pair for metric).
    """
    w = as_weights(w)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.asarray(Y, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64).ravel()
    if X.shape[1] != x.size:
        raise ValueError(f"dimension mismatch: {x.size} vs {X.shape[1]}")
    _check_dims(loss, w, x.size)
    delta = x[None, :] - X
    if loss.kind is LossKind.AUC_HINGE:
        return 0.5 * (y - Y) * (delta @ w), Y != y
    W = w.reshape(x.size, x.size)
    M = np.einsum("ij,jk,ik->i", delta, W, delta)
    return y * Y * (1.0 - M), np.ones(Y.shape, dtype=bool)


def pair_losses(loss: PairwiseLoss, w, x, y: float, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Vector of ``pair_loss(w, (x, y), (X[i], Y[i]))``."""
    u, active = pair_margins(loss, w, x, y, X, Y)
    out = np.maximum(0.0, 1.0 - u) + loss.regularizer(w)
    return np.where(active, out, 0.0)


def pair_loss(loss: PairwiseLoss, h, z: LabeledPoint, z2: LabeledPoint) -> float:
    return float(pair_losses(loss, h, z.features, z.label, z2.features[None, :], [z2.label])[0])


def mean_pair_subgradient(loss: PairwiseLoss, w, x, y: float, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Average subgradient of the anchor's losses against every row of ``(X, Y)``."""
    w = as_weights(w)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.asarray(Y, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64).ravel()
    u, active = pair_margins(loss, w, x, y, X, Y)
    hinge = active & (u < 1.0)
    delta = x[None, :] - X
    m = len(Y)
    if loss.kind is LossKind.AUC_HINGE:
        coef = np.where(hinge, -0.5 * (y - Y), 0.0)
        g = coef @ delta / m
    else:
        coef = np.where(hinge, y * Y, 0.0)
        g = np.einsum("i,ij,ik->jk", coef, delta, delta).ravel() / m
    if loss.sigma:
        g = g + loss.sigma * w * (np.count_nonzero(active) / m)
    return g


def pair_subgradient(loss: PairwiseLoss, h, z: LabeledPoint, z2: LabeledPoint) -> np.ndarray:
    return mean_pair_subgradient(loss, h, z.features, z.label, z2.features[None, :], [z2.label])


def all_pairs_penalty(loss: PairwiseLoss, h, z_t: LabeledPoint, history) -> float:
    """Average loss of ``z_t`` paired with every earlier stream point."""
    history = _as_dataset(history)
    if len(history) == 0:
        raise ValueError("no pairs: history is empty")
    return float(pair_losses(loss, h, z_t.features, z_t.label, history.X, history.y).mean())


def buffer_penalty(loss: PairwiseLoss, h, z_t: LabeledPoint, buf) -> float:
    """Average loss of ``z_t`` against the buffer contents, duplicates counted."""
    points = list(buf)
    if not points:
        raise ValueError("empty buffer")
    return all_pairs_penalty(loss, h, z_t, points)


def expected_risk(loss: PairwiseLoss, h, sample) -> float:
    """U-statistic estimate of the pairwise risk over all ordered pairs ``i != j``."""
    sample = _as_dataset(sample)
    m = len(sample)
    if m < 2:
        raise ValueError("expected risk needs at least 2 points")
    w = as_weights(h)
    if loss.kind is LossKind.AUC_HINGE:
        return _auc_risk_sorted(loss, w, sample)
    total = 0.0
    for i in range(m):
        total += pair_losses(loss, w, sample.X[i], sample.y[i], sample.X, sample.y).sum()
        total -= pair_losses(loss, w, sample.X[i], sample.y[i], sample.X[i:i + 1], sample.y[i:i + 1])[0]
    return float(total / (m * (m - 1)))


def _auc_risk_sorted(loss: PairwiseLoss, w: np.ndarray, sample: Dataset) -> float:
    # cross-label pairs only; sum of max(0, 1 - (p - q)) over positive scores p
    # and negative scores q, via sorting and prefix sums.
    _check_dims(loss, w, sample.dimension)
    scores = sample.X @ w
    pos = scores[sample.y > 0]
    neg = np.sort(scores[sample.y < 0])
    m = len(sample)
    if len(pos) == 0 or len(neg) == 0:
        return 0.0
    csum = np.concatenate([[0.0], np.cumsum(neg)])
    # pairs with q > p - 1 are in the hinge's active region
    first = np.searchsorted(neg, pos - 1.0, side="right")
    count = len(neg) - first
    hinge = np.sum(count * (1.0 - pos) + (csum[-1] - csum[first]))
    n_cross = len(pos) * len(neg)
    total = 2.0 * (hinge + n_cross * loss.regularizer(w))
    return float(total / (m * (m - 1)))


def _as_dataset(points) -> Dataset:
    if isinstance(points, Dataset):
        return points
    points = list(points)
    if not points:
        return Dataset(np.zeros((0, 0)), np.zeros(0))
    return Dataset.from_points(points)


def lipschitz_constant(loss: PairwiseLoss, radius: float, x_norm: float) -> float:
    """Lipschitz constant of one pair loss in ``w`` over the radius-``radius`` ball.

    ``x_norm`` bounds ``||x||_2`` for every point, so ``||x - x'|| <= 2 x_norm``.
    """
    diff = 2.0 * x_norm
    data_part = diff if loss.kind is LossKind.AUC_HINGE else diff**2
    return data_part + loss.sigma * radius


def loss_bound(loss: PairwiseLoss, radius: float, x_norm: float) -> float:
    """Largest attainable pair loss on the radius ball, used as ``B`` in bound reports."""
    diff = 2.0 * x_norm
    if loss.kind is LossKind.AUC_HINGE:
        hinge = 1.0 + radius * diff
    else:
        hinge = 1.0 + 1.0 + radius * diff**2
    return hinge + 0.5 * loss.sigma * radius**2
