"""Stream-oblivious buffer update policies.

Four policies are provided: FIFO, reservoir sampling (RS), RS-x (each slot
independently overwritten with probability ``1/t``) and RS-x² (a Binomial
count of distinct slots overwritten). Updates never look at the stream
element itself, only at the step index and the random source, so the slots
may hold anything; the learners store stream indices.

Randomness consumed per call to ``update_*`` at step ``t`` (``s`` is the
capacity):

========  ===========  =====================================================
policy    step         draws, in order
========  ===========  =====================================================
any       t <= s       none
FIFO      t > s        none
RS        t > s        ``uniform < s/t``; if admitted, ``below(s)`` picks slot
RS-x      t = s+1      ``below(s+1)`` for slot 0, ..., s-1 (index into TMP)
RS-x      t > s+1      ``uniform < 1/t`` for slot 0, ..., s-1
RS-x²     t = s+1      as RS-x
RS-x²     t > s+1      ``s`` Bernoulli(1/t) words summed to ``k``, then for
                       ``i < k``: ``j = i + below(s - i)``, swap ``perm[i]``
                       and ``perm[j]``; slots ``perm[:k]`` are overwritten
========  ===========  =====================================================

TMP at the repopulation step is ``slots + [z]`` in that order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from scipy import stats

from .rng import BatchRandom, RandomSource


class Policy(str, Enum):
    FIFO = "FIFO"
    RS = "RS"
    RSX = "RSX"
    RSX2 = "RSX2"

    @classmethod
    def parse(cls, name) -> "Policy":
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper().replace("-", "").replace("²", "2")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown buffer policy {name!r}") from None


@dataclass
class AuxRecord:
    """Auxiliary randomness consumed by one buffer update."""

    step: int
    kind: str
    bernoulli: tuple = ()
    binomial: int | None = None
    index: tuple = ()
    words: int = 0


@dataclass
class Buffer:
    """Capacity-bounded multiset of stream items.

    ``seen`` counts the updates applied so far; update ``t`` must be the
    ``seen + 1``-th. Pass ``record=True`` to keep an :class:`AuxRecord`
    per update in ``aux``.
    """

    capacity: int
    policy: Policy = Policy.RSX
    slots: list = field(default_factory=list)
    seen: int = 0
    record: bool = False
    aux: list = field(default_factory=list)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("buffer capacity must be positive")
        self.policy = Policy.parse(self.policy)

    def __len__(self) -> int:
        return len(self.slots)

    def __iter__(self):
        return iter(self.slots)

    def copy(self) -> "Buffer":
        return Buffer(self.capacity, self.policy, list(self.slots), self.seen, self.record, list(self.aux))


def _begin(buf: Buffer, t: int, policy: Policy) -> None:
    if buf.policy is not policy:
        raise ValueError(f"buffer policy is {buf.policy.value}, not {policy.value}")
    if t < 1 or t != buf.seen + 1:
        raise ValueError(f"step mismatch: buffer has seen {buf.seen} points, got t={t}")


def _log(buf: Buffer, rec: AuxRecord) -> None:
    if buf.record:
        buf.aux.append(rec)


def update_fifo(buf: Buffer, z: Any, t: int) -> Buffer:
    """Append ``z``, evicting the oldest slot once the buffer is full."""
    _begin(buf, t, Policy.FIFO)
    if len(buf.slots) >= buf.capacity:
        buf.slots.pop(0)
    buf.slots.append(z)
    buf.seen = t
    _log(buf, AuxRecord(t, "fifo"))
    return buf


def update_rs(buf: Buffer, z: Any, t: int, rng: RandomSource) -> Buffer:
    """Vitter's reservoir sampling: admit with probability ``s/t`` into a uniform slot."""
    _begin(buf, t, Policy.RS)
    s = buf.capacity
    if len(buf.slots) < s:
        buf.slots.append(z)
        _log(buf, AuxRecord(t, "space"))
    else:
        admit = rng.bernoulli(s / t)
        slot = ()
        if admit:
            slot = (rng.below(s),)
            buf.slots[slot[0]] = z
        _log(buf, AuxRecord(t, "normal", bernoulli=(admit,), index=slot, words=1 + len(slot)))
    buf.seen = t
    return buf


def _repopulate(buf: Buffer, z: Any, t: int, rng: RandomSource) -> None:
    s = buf.capacity
    tmp = buf.slots + [z]
    picks = rng.belows(s + 1, s)
    buf.slots = [tmp[i] for i in picks]
    _log(buf, AuxRecord(t, "repopulate", index=tuple(int(i) for i in picks), words=s))


def update_rsx(buf: Buffer, z: Any, t: int, rng: RandomSource) -> Buffer:
    """RS-x: after a one-off repopulation, every slot is replaced with probability ``1/t``."""
    _begin(buf, t, Policy.RSX)
    s = buf.capacity
    if len(buf.slots) < s:
        buf.slots.append(z)
        _log(buf, AuxRecord(t, "space"))
    elif t == s + 1:
        _repopulate(buf, z, t, rng)
    else:
        hits = rng.bernoullis(1.0 / t, s)
        for i in np.flatnonzero(hits):
            buf.slots[i] = z
        _log(buf, AuxRecord(t, "normal", bernoulli=tuple(bool(h) for h in hits), words=s))
    buf.seen = t
    return buf


def update_rsx2(buf: Buffer, z: Any, t: int, rng: RandomSource) -> Buffer:
    """RS-x²: draw ``k ~ Binomial(s, 1/t)`` and overwrite ``k`` distinct uniform slots."""
    _begin(buf, t, Policy.RSX2)
    s = buf.capacity
    if len(buf.slots) < s:
        buf.slots.append(z)
        _log(buf, AuxRecord(t, "space"))
    elif t == s + 1:
        _repopulate(buf, z, t, rng)
    else:
        k = int(np.count_nonzero(rng.bernoullis(1.0 / t, s)))
        perm = list(range(s))
        for i in range(k):
            j = i + rng.below(s - i)
            perm[i], perm[j] = perm[j], perm[i]
        for i in perm[:k]:
            buf.slots[i] = z
        _log(buf, AuxRecord(t, "normal", binomial=k, index=tuple(perm[:k]), words=s + k))
    buf.seen = t
    return buf


def update(buf: Buffer, z: Any, t: int, rng: RandomSource | None = None) -> Buffer:
    """Dispatch to the update rule of ``buf.policy``."""
    if buf.policy is Policy.FIFO:
        return update_fifo(buf, z, t)
    if rng is None:
        raise ValueError(f"policy {buf.policy.value} needs a random source")
    if buf.policy is Policy.RS:
        return update_rs(buf, z, t, rng)
    if buf.policy is Policy.RSX:
        return update_rsx(buf, z, t, rng)
    return update_rsx2(buf, z, t, rng)


def replacement_pattern_probability(s: int, t: int, k: int) -> float:
    """Probability of one specific RS-x replacement pattern with ``k`` replaced slots."""
    if not 0 <= k <= s:
        raise ValueError(f"k must lie in [0, {s}], got {k}")
    if t <= s:
        raise ValueError("pattern law applies only to normal steps, t > s")
    return (1.0 / t) ** k * (1.0 - 1.0 / t) ** (s - k)


# ---------------------------------------------------------------------------
# Batched simulation of index-level buffers. Trial j replays
# RandomSource(seed).spawn(j) draw for draw, so results coincide with running
# the scalar update functions on the stream indices 1, 2, ...


def _batch_step(policy: Policy, slots: np.ndarray, t: int, br: BatchRandom) -> None:
    trials, s = slots.shape
    if policy is Policy.FIFO:
        slots[:, :-1] = slots[:, 1:]
        slots[:, -1] = t
    elif policy is Policy.RS:
        admit = br.bernoulli(s / t)
        rows = np.flatnonzero(admit)
        slots[rows, br.below(s, admit)] = t
    elif t == s + 1:
        tmp = np.concatenate([slots, np.full((trials, 1), t, dtype=slots.dtype)], axis=1)
        picks = np.stack([br.below(s + 1) for _ in range(s)], axis=1)
        slots[:] = np.take_along_axis(tmp, picks, axis=1)
    elif policy is Policy.RSX:
        for i in range(s):
            slots[br.bernoulli(1.0 / t), i] = t
    else:
        k = np.zeros(trials, dtype=np.int64)
        for _ in range(s):
            k += br.bernoulli(1.0 / t)
        perm = np.tile(np.arange(s), (trials, 1))
        for i in range(s):
            active = k > i
            if not active.any():
                break
            rows = np.flatnonzero(active)
            j = i + br.below(s - i, active)
            perm[rows, i], perm[rows, j] = perm[rows, j], perm[rows, i]
            slots[rows, perm[rows, i]] = t


def simulate_buffers(policy, s: int, steps: int, trials: int, seed: int) -> np.ndarray:
    """Slot contents after feeding stream indices ``1..steps`` to ``trials`` buffers.

    Returns an integer array of shape ``(trials, min(steps, s))``. To obtain
    the buffer a learner sees at step ``t`` use ``steps = t - 1``.
    """
    policy = Policy.parse(policy)
    br = BatchRandom.spawned(seed, trials)
    slots = np.zeros((trials, s), dtype=np.int64)
    for t in range(1, steps + 1):
        if t <= s:
            slots[:, t - 1] = t
        else:
            _batch_step(policy, slots, t, br)
    return slots[:, : min(steps, s)]


def simulate_patterns(policy, s: int, t: int, trials: int, seed: int) -> np.ndarray:
    """Replacement patterns of one normal update at step ``t > s + 1``.

    Each trial starts from a full buffer with a fresh source
    ``RandomSource(seed).spawn(j)``; returns a boolean ``(trials, s)`` array.
    """
    policy = Policy.parse(policy)
    if policy not in (Policy.RSX, Policy.RSX2):
        raise ValueError("replacement patterns are defined for RSX and RSX2")
    if t <= s + 1:
        raise ValueError("a normal update step needs t > s + 1")
    br = BatchRandom.spawned(seed, trials)
    slots = np.zeros((trials, s), dtype=np.int64)
    _batch_step(policy, slots, t, br)
    return slots == t


def replay_buffer(policy, s: int, steps: int, rng: RandomSource) -> Buffer:
    """Scalar counterpart of one trial of :func:`simulate_buffers`."""
    buf = Buffer(s, policy)
    for t in range(1, steps + 1):
        update(buf, t, t, rng)
    return buf


# ---------------------------------------------------------------------------
# Distribution checks


def tv_distance(p, q) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    return 0.5 * float(np.abs(p - q).sum())


def slot_histogram(slots: np.ndarray, n_values: int) -> np.ndarray:
    """``counts[slot, v - 1]`` = number of trials where ``slot`` holds index ``v``."""
    trials, s = slots.shape
    counts = np.zeros((s, n_values), dtype=np.int64)
    for i in range(s):
        counts[i] = np.bincount(slots[:, i] - 1, minlength=n_values)[:n_values]
    return counts


def marginal_pvalues(slots: np.ndarray, n_values: int) -> np.ndarray:
    """Chi-square goodness-of-fit p-value of each slot against uniform on ``1..n_values``."""
    return np.array([stats.chisquare(row).pvalue for row in slot_histogram(slots, n_values)])


def joint_tv_from_uniform_product(slots: np.ndarray, n_values: int, a: int = 0, b: int = 1) -> float:
    """TV distance between the empirical joint law of slots ``a, b`` and uniform x uniform."""
    cells = (slots[:, a] - 1) * n_values + (slots[:, b] - 1)
    joint = np.bincount(cells, minlength=n_values * n_values) / len(slots)
    return tv_distance(joint, np.full(n_values * n_values, 1.0 / n_values**2))


def pattern_distribution(patterns: np.ndarray) -> np.ndarray:
    """Empirical law over ``{0,1}^s``; pattern ``r`` sits at ``sum(r[i] << i)``."""
    trials, s = patterns.shape
    codes = patterns.astype(np.int64) @ (1 << np.arange(s))
    return np.bincount(codes, minlength=1 << s) / trials


def exact_pattern_law(s: int, t: int) -> np.ndarray:
    law = np.empty(1 << s)
    for code in range(1 << s):
        law[code] = replacement_pattern_probability(s, t, bin(code).count("1"))
    return law


@dataclass
class DistTestResult:
    name: str
    statistic: float
    threshold: float
    passed: bool
    direction: str = "<="


PAIR_TRIALS = 200_000
PATTERN_TRIALS = 1_000_000
PATTERN_SLOTS = 6


def run_disttests(policy, s: int, stream_len: int, trials: int, seed: int,
                  alpha: float = 1e-3, tv_tol: float = 0.01):
    """Monte-Carlo checks of a policy's buffer law at the last step of a stream.

    The buffer examined is the one a learner sees at ``t = stream_len``,
    i.e. after ``stream_len - 1`` updates. Returns ``(results, histogram)``
    where ``histogram`` is the slot-by-index count matrix.
    """
    policy = Policy.parse(policy)
    prev = stream_len - 1
    slots = simulate_buffers(policy, s, prev, trials, seed)
    hist = slot_histogram(slots, prev)
    results: list[DistTestResult] = []

    if policy is Policy.FIFO or prev <= s:
        expected = np.arange(max(1, prev - s + 1), prev + 1)
        mismatches = int(np.count_nonzero(slots != expected))
        results.append(DistTestResult("prefix_or_recent_content", mismatches, 0, mismatches == 0))
        return results, hist

    if policy is Policy.RS:
        dup = int(np.count_nonzero(np.diff(np.sort(slots, axis=1), axis=1) == 0))
        results.append(DistTestResult("no_duplicate_indices", dup, 0, dup == 0))
        pooled = hist.sum(axis=0)
        p = stats.chisquare(pooled).pvalue
        results.append(DistTestResult("inclusion_uniform_chisq_p", p, alpha, p >= alpha, ">="))
        tv = tv_distance(pooled / pooled.sum(), np.full(prev, 1.0 / prev))
        results.append(DistTestResult("inclusion_uniform_tv", tv, tv_tol, tv <= tv_tol))
        return results, hist

    for i, p in enumerate(marginal_pvalues(slots, prev)):
        results.append(DistTestResult(f"slot{i}_uniform_chisq_p", p, alpha, p >= alpha, ">="))
    if s >= 2:
        # independence is checked on a short stream so the joint table stays
        # small; the TV estimate needs >= PAIR_TRIALS draws to sit below tv_tol
        short = min(prev, 5)
        pair = simulate_buffers(policy, 2, short, max(trials, PAIR_TRIALS), seed + 1)
        tv = joint_tv_from_uniform_product(pair, short)
        results.append(DistTestResult("slot_pair_product_tv", tv, tv_tol, tv <= tv_tol))
    # pattern tables have 2^s cells, so the check runs on at most PATTERN_SLOTS slots
    ps = min(s, PATTERN_SLOTS)
    t = ps + 2
    n_pat = max(trials, PATTERN_TRIALS)
    mine = pattern_distribution(simulate_patterns(policy, ps, t, n_pat, seed + 2))
    other = Policy.RSX2 if policy is Policy.RSX else Policy.RSX
    theirs = pattern_distribution(simulate_patterns(other, ps, t, n_pat, seed + 3))
    tv_law = tv_distance(mine, exact_pattern_law(ps, t))
    results.append(DistTestResult("pattern_law_tv", tv_law, tv_tol, tv_law <= tv_tol))
    tv_pair = tv_distance(mine, theirs)
    results.append(DistTestResult(f"pattern_vs_{other.value}_tv", tv_pair, tv_tol, tv_pair <= tv_tol))
    return results, hist


def all_patterns(s: int):
    """Every replacement pattern of ``s`` slots in code order."""
    return [tuple((code >> i) & 1 for i in range(s)) for code in range(1 << s)]
