"""AUC, regret and online-to-batch risk reports."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .core import Dataset, as_weights
from .learners import EnsembleTrace, average_hypothesis
from .losses import PairwiseLoss, expected_risk, pair_losses


def auc_score(h, test: Dataset) -> float:
    """Fraction of (positive, negative) pairs ranked correctly; ties count 1/2.

    Computed from midranks (Mann-Whitney U).
    """
    scores = test.X @ as_weights(h)
    pos = test.y > 0
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: test set has a single class")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def metric_pair_auc(h, test: Dataset) -> float:
    """Pair-level AUC of a Mahalanobis hypothesis.

    Unordered test pairs are scored by ``-M_W(x, x')``; same-label pairs
    are the positives, so a good metric ranks them closer. Ties count 1/2.
    """
    W = np.asarray(as_weights(h)).reshape(test.dimension, test.dimension)
    i, j = np.triu_indices(len(test), k=1)
    delta = test.X[i] - test.X[j]
    scores = -np.einsum("pi,ij,pj->p", delta, W, delta)
    same = test.y[i] == test.y[j]
    n_pos, n_neg = int(same.sum()), int((~same).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: test set has no pairs of one kind")
    ranks = rankdata(scores)
    return float((ranks[same].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def penalty_series(loss: PairwiseLoss, hypotheses, stream: Dataset) -> np.ndarray:
    """All-pairs penalties ``L_t(h_{t-1})`` for ``t = 2..n``.

    ``hypotheses`` is either one weight vector (used at every step) or an
    ``(n-1, p)`` array whose row ``t-2`` is played at step ``t``.
    """
    H = np.asarray(hypotheses, dtype=np.float64)
    n = len(stream)
    if H.ndim == 1:
        H = np.broadcast_to(H, (n - 1, H.size))
    if len(H) != n - 1:
        raise ValueError(f"length mismatch: {len(H)} hypotheses for a stream of {n}")
    X, Y = stream.X, stream.y
    return np.array([pair_losses(loss, H[t - 2], X[t - 1], Y[t - 1], X[: t - 1], Y[: t - 1]).mean()
                     for t in range(2, n + 1)])


def buffer_penalty_series(loss: PairwiseLoss, hypotheses, stream: Dataset, snapshots) -> np.ndarray:
    """Finite-buffer penalties evaluated on recorded buffer states."""
    if snapshots is None:
        raise ValueError("trace has no buffer snapshots")
    H = np.asarray(hypotheses, dtype=np.float64)
    n = len(stream)
    if H.ndim == 1:
        H = np.broadcast_to(H, (n - 1, H.size))
    if len(H) != n - 1 or len(snapshots) != n - 1:
        raise ValueError("length mismatch between trace, snapshots and stream")
    X, Y = stream.X, stream.y
    return np.array([pair_losses(loss, H[t - 2], X[t - 1], Y[t - 1], X[idx], Y[idx]).mean()
                     for t, idx in zip(range(2, n + 1), snapshots)])


def all_pairs_regret(trace: EnsembleTrace, stream: Dataset, loss: PairwiseLoss, reference) -> float:
    ours = penalty_series(loss, trace.hypotheses, stream)
    ref = penalty_series(loss, as_weights(reference), stream)
    return float(ours.sum() - ref.sum())


def finite_buffer_regret(trace: EnsembleTrace, stream: Dataset, loss: PairwiseLoss, reference) -> float:
    ours = buffer_penalty_series(loss, trace.hypotheses, stream, trace.snapshots)
    ref = buffer_penalty_series(loss, as_weights(reference), stream, trace.snapshots)
    return float(ours.sum() - ref.sum())


@dataclass
class RegretReport:
    all_pairs_regret: float
    finite_buffer_regret: float
    per_step_all_pairs: float
    reference_objective: float
    n: int
    s: int

    def as_dict(self) -> dict:
        return asdict(self)


def regret_report(trace: EnsembleTrace, stream: Dataset, loss: PairwiseLoss, reference, s: int) -> RegretReport:
    n = len(stream)
    ref_series = penalty_series(loss, as_weights(reference), stream)
    apr = float(penalty_series(loss, trace.hypotheses, stream).sum() - ref_series.sum())
    return RegretReport(
        all_pairs_regret=apr,
        finite_buffer_regret=finite_buffer_regret(trace, stream, loss, reference),
        per_step_all_pairs=apr / (n - 1),
        reference_objective=float(ref_series.sum()),
        n=n,
        s=s,
    )


def online_to_batch_report(trace: EnsembleTrace, holdout: Dataset, loss: PairwiseLoss,
                           include_best: bool = True) -> dict:
    """Held-out risk of the ensemble, of its average, and of its best member."""
    if len(holdout) < 2:
        raise ValueError("holdout needs at least 2 points")
    risks = np.array([expected_risk(loss, w, holdout) for w in trace.hypotheses])
    report = {
        "ensembleAvgRisk": float(risks.mean()),
        "avgHypRisk": expected_risk(loss, average_hypothesis(trace), holdout),
    }
    if include_best:
        # same tie rule as best_hypothesis: earliest minimizer
        report["bestHypRisk"] = float(risks[int(np.argmin(risks))])
    return report

