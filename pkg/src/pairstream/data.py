"""Dataset ingestion (LIBSVM text), splitting, synthetic tasks and normalization."""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass

import numpy as np

from .core import Dataset, shuffle_permutation
from .rng import RandomSource


class LibsvmError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def _lines(source):
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        return io.StringIO(source)
    if isinstance(source, io.TextIOBase) or hasattr(source, "encoding"):
        return source
    return io.TextIOWrapper(source, encoding="utf-8")


def parse_libsvm(source, positive_labels=None, dimension: int | None = None,
                 name: str = "libsvm") -> Dataset:
    """Parse ``<label> <index>:<value> ...`` lines into a dense dataset.

    Indices are 1-based and strictly increasing within a line; missing
    indices are zeros and ``#`` starts a comment. Labels above 0 map to +1
    and the rest to -1. Files with more than two distinct labels must pass
    ``positive_labels`` (one-vs-rest: listed labels become +1).
    """
    labels, rows, max_index = [], [], 0
    for lineno, raw in enumerate(_lines(source), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise LibsvmError(lineno, f"non-numeric label {tokens[0]!r}") from None
        if not math.isfinite(label):
            raise LibsvmError(lineno, f"non-finite label {tokens[0]!r}")
        entries, last = [], 0
        for tok in tokens[1:]:
            idx, sep, val = tok.partition(":")
            if not sep:
                raise LibsvmError(lineno, f"malformed token {tok!r}")
            try:
                i, v = int(idx), float(val)
            except ValueError:
                raise LibsvmError(lineno, f"malformed token {tok!r}") from None
            if i < 1:
                raise LibsvmError(lineno, f"feature index {i} is not 1-based")
            if i <= last:
                raise LibsvmError(lineno, f"feature index {i} not ascending")
            if not math.isfinite(v):
                raise LibsvmError(lineno, f"non-finite value in {tok!r}")
            entries.append((i, v))
            last = i
        labels.append(label)
        rows.append(entries)
        max_index = max(max_index, last)

    if not rows:
        raise ValueError("empty dataset")
    if dimension is None:
        dimension = max(max_index, 1)
    elif max_index > dimension:
        raise ValueError(f"feature index {max_index} exceeds declared dimension {dimension}")
    X = np.zeros((len(rows), dimension))
    for r, entries in enumerate(rows):
        for i, v in entries:
            X[r, i - 1] = v
    return Dataset(X, binarize_labels(labels, positive_labels), name=name, dimension=dimension)


def binarize_labels(labels, positive_labels=None) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.float64)
    if positive_labels is not None:
        return np.where(np.isin(labels, list(positive_labels)), 1.0, -1.0)
    distinct = np.unique(labels)
    if len(distinct) > 2:
        raise ValueError(f"{len(distinct)} distinct labels found; pass positive_labels for one-vs-rest")
    return np.where(labels > 0, 1.0, -1.0)


def load_libsvm(path, **kwargs) -> Dataset:
    kwargs.setdefault("name", os.path.splitext(os.path.basename(str(path)))[0])
    with open(path, encoding="utf-8") as fh:
        return parse_libsvm(fh, **kwargs)


def to_libsvm(dataset: Dataset) -> str:
    """Serialize with exact float reprs; zero features are omitted."""
    out = []
    for x, y in zip(dataset.X, dataset.y):
        parts = ["+1" if y > 0 else "-1"]
        parts += [f"{i + 1}:{float(v)!r}" for i, v in enumerate(x) if v != 0.0]
        out.append(" ".join(parts))
    return "\n".join(out) + "\n"


@dataclass
class SplitSpec:
    train_fraction: float = 0.6
    train_cap: int = 20000
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction <= 1:
            raise ValueError("train fraction must lie in (0, 1]")
        if self.train_cap < 1:
            raise ValueError("train cap must be >= 1")


def split(dataset: Dataset, spec: SplitSpec, rng: RandomSource | None = None):
    """Shuffled train/test split; train size is ``min(floor(fraction*m), cap)``.

    ``rng`` defaults to ``RandomSource(spec.seed)``.
    """
    m = len(dataset)
    if m < 2:
        raise ValueError("split needs at least 2 points")
    n_train = min(int(math.floor(spec.train_fraction * m)), spec.train_cap)
    if n_train < 1 or n_train >= m:
        raise ValueError(f"split of {m} points leaves an empty side (train={n_train})")
    perm = shuffle_permutation(m, rng if rng is not None else RandomSource(spec.seed))
    return (dataset.subset(perm[:n_train], name=dataset.name),
            dataset.subset(perm[n_train:], name=dataset.name))


def synth_gaussian(n_pos: int, n_neg: int, d: int, separation: float, rng: RandomSource,
                   name: str = "gaussian") -> Dataset:
    """Positives ~ N(+mu, I), negatives ~ N(-mu, I), ``mu = (separation/2) e_1``.

    Positives occupy the first ``n_pos`` rows.
    """
    if n_pos < 1 or n_neg < 1 or d < 1 or separation < 0:
        raise ValueError("need n_pos, n_neg, d >= 1 and separation >= 0")
    m = n_pos + n_neg
    X = rng.normals(m * d).reshape(m, d)
    X[:n_pos, 0] += separation / 2.0
    X[n_pos:, 0] -= separation / 2.0
    y = np.concatenate([np.ones(n_pos), -np.ones(n_neg)])
    return Dataset(X, y, name=name)


def normalize_features(dataset: Dataset, mode: str = "unit-l2") -> Dataset:
    """Scale every nonzero point to unit Euclidean norm (``mode="unit-l2"``)."""
    if mode == "none":
        return dataset
    if mode != "unit-l2":
        raise ValueError(f"unknown normalization mode {mode!r}")
    norms = np.linalg.norm(dataset.X, axis=1, keepdims=True)
    X = np.divide(dataset.X, norms, out=dataset.X.copy(), where=norms > 0)
    return Dataset(X, dataset.y.copy(), name=dataset.name, dimension=dataset.dimension)


def dataset_stats(dataset: Dataset) -> dict:
    norms = np.linalg.norm(dataset.X, axis=1)
    return {
        "name": dataset.name,
        "points": len(dataset),
        "dimension": dataset.dimension,
        "positives": int(np.count_nonzero(dataset.y > 0)),
        "negatives": int(np.count_nonzero(dataset.y < 0)),
        "max_l2_norm": float(norms.max()) if len(norms) else 0.0,
        "max_abs_feature": float(np.abs(dataset.X).max()) if dataset.X.size else 0.0,
    }
