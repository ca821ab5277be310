"""Domain types shared across the package."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

import numpy as np

from .rng import RandomSource


class TaskKind(str, Enum):
    AUC_LINEAR = "auc"
    METRIC_MAHALANOBIS = "metric"


@dataclass(frozen=True)
class LabeledPoint:
    """A stream element ``z = (x, y)``."""

    features: np.ndarray
    label: float

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("features must be a 1-d vector")
        if not np.all(np.isfinite(x)):
            raise ValueError("features must be finite")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "label", float(self.label))

    @property
    def dimension(self) -> int:
        return self.features.shape[0]


@dataclass
class Hypothesis:
    """Flat weight vector; for the metric task, a row-major flattened d x d matrix."""

    weights: np.ndarray
    task: TaskKind = TaskKind.AUC_LINEAR

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).ravel()
        self.task = TaskKind(self.task)
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("hypothesis weights must be finite")

    def __array__(self, dtype=None, copy=None):
        return self.weights if dtype is None else self.weights.astype(dtype)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.weights))

    def matrix(self) -> np.ndarray:
        d = int(round(np.sqrt(self.weights.size)))
        return self.weights.reshape(d, d)


def as_weights(h) -> np.ndarray:
    """Weights of a :class:`Hypothesis` or anything array-like."""
    if isinstance(h, Hypothesis):
        return h.weights
    return np.asarray(h, dtype=np.float64).ravel()


@dataclass
class Dataset:
    """Labelled points stored as a dense ``(m, d)`` feature matrix.

    Behaves as a sequence of :class:`LabeledPoint`; a stream is simply a
    dataset whose row order is the arrival order.
    """

    X: np.ndarray
    y: np.ndarray
    name: str = "dataset"
    dimension: int = field(default=-1)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError(f"feature matrix {X.shape} does not match {y.shape[0]} labels")
        if self.dimension == -1:
            self.dimension = X.shape[1]
        elif X.shape[1] != self.dimension:
            raise ValueError(f"points have dimension {X.shape[1]}, dataset declares {self.dimension}")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        self.X, self.y = X, y

    @classmethod
    def from_points(cls, points, name: str = "dataset", dimension: int | None = None) -> "Dataset":
        points = list(points)
        if dimension is None:
            if not points:
                raise ValueError("empty dataset")
            dimension = points[0].dimension
        X = np.zeros((len(points), dimension))
        for i, p in enumerate(points):
            if p.dimension != dimension:
                raise ValueError(f"point {i} has dimension {p.dimension}, expected {dimension}")
            X[i] = p.features
        y = np.array([p.label for p in points], dtype=np.float64)
        return cls(X, y, name=name, dimension=dimension)

    def __len__(self) -> int:
        return self.y.shape[0]

    def __getitem__(self, i) -> LabeledPoint:
        return LabeledPoint(self.X[i], self.y[i])

    def __iter__(self) -> Iterator[LabeledPoint]:
        for i in range(len(self)):
            yield self[i]

    @property
    def points(self) -> list[LabeledPoint]:
        return list(self)

    def subset(self, index, name: str | None = None) -> "Dataset":
        index = np.asarray(index, dtype=np.int64)
        return Dataset(self.X[index], self.y[index], name=name or self.name, dimension=self.dimension)

    def check_binary(self) -> None:
        bad = ~np.isin(self.y, (-1.0, 1.0))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise ValueError(f"label {self.y[i]!r} at row {i} is not in {{-1, +1}}")


def shuffle_permutation(m: int, rng: RandomSource) -> np.ndarray:
    """Fisher-Yates permutation of ``range(m)``.

    Draw order: for ``i = m-1, ..., 1`` draw ``j = rng.below(i + 1)`` and
    swap positions ``i`` and ``j``; ``m - 1`` draws in total.
    """
    perm = np.arange(m)
    for i in range(m - 1, 0, -1):
        j = rng.below(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def make_stream(dataset: Dataset, rng: RandomSource) -> Dataset:
    """Shuffle a dataset into a stream order (see :func:`shuffle_permutation`)."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    return dataset.subset(shuffle_permutation(len(dataset), rng), name=dataset.name)
