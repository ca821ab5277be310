"""Rademacher-complexity bound calculators and excess-risk bound right-hand sides.

``log`` is the natural logarithm throughout. For the linear AUC class the
exponent naming follows the table convention: hypotheses live in an
``L_q`` ball, data norms are measured in the conjugate ``L_p`` norm, and
the bound is ``2 ||X||_p ||W||_q sqrt((p - 1)/n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset
from .rng import RandomSource, below_from_words, sign_from_words


@dataclass
class BoundInputs:
    n: int = 100
    d: int = 2
    norm_x: float = 1.0       # ||X||_p, paired with the L_q ball
    norm_x_2: float = 1.0
    norm_x_inf: float = 1.0
    norm_w: float = 1.0
    p: float = 2.0
    q: float | None = None
    kappa: float = 1.0
    num_kernels: int = 2
    L: float = 1.0
    Y: float = 2.0
    B: float = 1.0
    delta: float = 0.05
    regret: float = 0.0
    s: int = 1
    c_d: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")


def _root(x: float, n: int) -> float:
    return math.sqrt(x / n)


def auc_rademacher_bound(variant: str, inp: BoundInputs) -> float:
    """Linear AUC class: ``"Lq-ball"`` or ``"L1-ball"``."""
    v = variant.lower()
    if v == "lq-ball":
        if inp.p <= 1:
            raise ValueError("Lq-ball needs p > 1")
        if inp.q is not None and not math.isclose(1 / inp.p + 1 / inp.q, 1.0, rel_tol=1e-12):
            raise ValueError(f"p={inp.p} and q={inp.q} are not conjugate")
        return 2.0 * inp.norm_x * inp.norm_w * _root(inp.p - 1.0, inp.n)
    if v == "l1-ball":
        if inp.d < 2:
            raise ValueError("L1-ball bound needs d >= 2")
        return 2.0 * inp.norm_x_inf * inp.norm_w * _root(math.e * math.log(inp.d), inp.n)
    raise ValueError(f"unknown AUC variant {variant!r}")


def metric_rademacher_bound(variant: str, inp: BoundInputs) -> float:
    """Mahalanobis / similarity class: ``"2,2"``, ``"2,1"``, ``"1,1"`` or ``"S1"``."""
    v = variant.replace(" ", "").replace("(", "").replace(")", "").upper()
    if v == "2,2":
        return inp.norm_x_2**2 * inp.norm_w * _root(1.0, inp.n)
    if inp.d < 2:
        raise ValueError("log-d variants need d >= 2")
    logd = math.log(inp.d)
    if v == "2,1":
        return inp.norm_x_2 * inp.norm_x_inf * inp.norm_w * _root(math.e * logd, inp.n)
    if v == "1,1":
        return inp.norm_x_inf**2 * inp.norm_w * _root(2.0 * math.e * logd, inp.n)
    if v in ("S1", "S(1)"):
        return inp.norm_x_2**2 * inp.norm_w * _root(math.e * logd, inp.n)
    raise ValueError(f"unknown metric variant {variant!r}")


def mkl_rademacher_bound(variant: str, inp: BoundInputs) -> float:
    """Kernel-combination class: ``"L2-sphere"`` or ``"L1-simplex"``."""
    v = variant.lower()
    if v == "l2-sphere":
        return inp.kappa**2 * _root(inp.num_kernels, inp.n)
    if v == "l1-simplex":
        if inp.num_kernels < 2:
            raise ValueError("L1-simplex bound needs at least 2 kernels")
        return inp.kappa**2 * _root(math.e * math.log(inp.num_kernels), inp.n)
    raise ValueError(f"unknown MKL variant {variant!r}")


TABLES = {
    "auc": (auc_rademacher_bound, ("Lq-ball", "L1-ball"), {
        "Lq-ball": "2*|X|_p*|W|_q*sqrt((p-1)/n)",
        "L1-ball": "2*|X|_inf*|W|_1*sqrt(e*log(d)/n)",
    }),
    "metric": (metric_rademacher_bound, ("2,2", "2,1", "1,1", "S1"), {
        "2,2": "|X|_2^2*|W|_(2,2)*sqrt(1/n)",
        "2,1": "|X|_2*|X|_inf*|W|_(2,1)*sqrt(e*log(d)/n)",
        "1,1": "|X|_inf^2*|W|_(1,1)*sqrt(2*e*log(d)/n)",
        "S1": "|X|_2^2*|W|_S(1)*sqrt(e*log(d)/n)",
    }),
    "mkl": (mkl_rademacher_bound, ("L2-sphere", "L1-simplex"), {
        "L2-sphere": "kappa^2*sqrt(p/n)",
        "L1-simplex": "kappa^2*sqrt(e*log(p)/n)",
    }),
}


def contraction_bound(L: float, Y: float, rad_of_h: float) -> float:
    """Rademacher complexity of ``loss o H`` from that of ``H``: ``L * Y * R_n(H)``."""
    if L < 0 or Y < 0 or rad_of_h < 0:
        raise ValueError("contraction inputs must be nonnegative")
    return L * Y * rad_of_h


def dimension_factor(kind: str, d: int) -> float:
    """Preset ``C_d``: 1 for L2 regularization, ``sqrt(e log d)`` for L1 / trace norm."""
    kind = kind.lower()
    if kind in ("l2", "2,2", "lq"):
        return 1.0
    if kind in ("l1", "trace", "s1", "2,1", "1,1"):
        return math.sqrt(math.e * math.log(d))
    raise ValueError(f"unknown regularization kind {kind!r}")


def excess_risk_bound_rhs(kind: str, inp: BoundInputs, rad_terms=()) -> float:
    """Excess-risk bound beyond ``L(h*)`` for an ensemble with a given regret.

    ``"bounded"`` (all-pairs regret, bounded loss)::

        4/(n-1) * sum(rad_terms) + regret/(n-1) + 6 B sqrt(log(n/delta)/(n-1))

    ``rad_terms`` holds ``R_{t-1}(loss o H)`` for ``t = 2..n``.

    ``"buffer"`` (finite-buffer regret, capacity ``s``); the order-of-magnitude
    terms are reported with the same constants 4 and 6::

        regret/(n-1) + 4 C_d / sqrt(s) + 6 B sqrt(log(n/delta)/s)
    """
    if not 0 < inp.delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if inp.n < 2:
        raise ValueError("n must be at least 2")
    n, B = inp.n, inp.B
    log_term = math.log(n / inp.delta)
    if kind == "bounded":
        rad = float(np.sum(rad_terms)) if len(rad_terms) else 0.0
        return 4.0 * rad / (n - 1) + inp.regret / (n - 1) + 6.0 * B * math.sqrt(log_term / (n - 1))
    if kind == "buffer":
        if inp.s < 1:
            raise ValueError("buffer capacity must be positive")
        return inp.regret / (n - 1) + 4.0 * inp.c_d / math.sqrt(inp.s) + 6.0 * B * math.sqrt(log_term / inp.s)
    raise ValueError(f"unknown bound kind {kind!r}")


def olp_regret_rate(inp: BoundInputs) -> float:
    """Per-step regret rate ``C_d sqrt(log(n/delta)/s) + sqrt(1/(n-1))``, unit constants."""
    if not 0 < inp.delta < 1 or inp.n < 2 or inp.s < 1:
        raise ValueError("need delta in (0, 1), n >= 2, s >= 1")
    return inp.c_d * math.sqrt(math.log(inp.n / inp.delta) / inp.s) + math.sqrt(1.0 / (inp.n - 1))


def empirical_rademacher_mc(sample: Dataset, radius: float, trials: int, rng: RandomSource,
                            n: int | None = None, return_stderr: bool = False, chunk: int = 4096):
    """Monte-Carlo Rademacher complexity of the linear pairwise class on an L2 ball.

    Each trial draws an anchor ``z`` and ``z_1..z_n`` uniformly with
    replacement from ``sample`` (``n`` defaults to its size) and signs ``eps``; the supremum over
    ``||w|| <= radius`` of ``(1/n) sum eps_tau w.(x - x_tau)`` is
    ``radius * ||(1/n) sum eps_tau (x - x_tau)||``. Words are consumed per
    trial in the order: anchor index, ``n`` partner indices, ``n`` signs.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if len(sample) < 2:
        raise ValueError("sample needs at least 2 points")
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    m = len(sample)
    n = m if n is None else n
    X = sample.X
    values = np.empty(trials)
    width = 1 + 2 * n
    for a in range(0, trials, chunk):
        b = min(trials, a + chunk)
        words = rng.u64s((b - a) * width).reshape(b - a, width)
        idx = below_from_words(words[:, : 1 + n], m)
        eps = sign_from_words(words[:, 1 + n:])
        anchor = X[idx[:, 0]]
        partners = X[idx[:, 1:]]
        # (1/n) sum eps (x - x_tau) = mean(eps) x - (1/n) sum eps x_tau
        v = eps.mean(axis=1)[:, None] * anchor - np.einsum("tn,tnd->td", eps, partners) / n
        values[a:b] = radius * np.linalg.norm(v, axis=1)
    est = float(values.mean())
    if return_stderr:
        return est, float(values.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return est
