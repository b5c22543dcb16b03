"""Core domain types and the multiclass scoring primitives.

A K-category linear classifier over n-dimensional features is a single
weight vector of length K*n, laid out as K consecutive per-category slots.
Prediction picks the category whose slot scores the input highest.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateProblemError,
    DimensionError,
    InvalidCategoryError,
)


def _as_vector(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class LabeledSample:
    """One feature vector with a category label and a domain tag."""

    features: np.ndarray
    label: int
    domain: str

    def __post_init__(self):
        object.__setattr__(self, "features", _as_vector(self.features))
        if not np.all(np.isfinite(self.features)):
            raise DimensionError("sample features must be finite")
        if self.label < 1:
            raise InvalidCategoryError(f"label must be >= 1, got {self.label}")


@dataclass(frozen=True, eq=False)
class DomainDataset:
    """An ordered collection of labeled samples sharing one domain.

    `feature_dim` and `category_count` are shared with every other dataset
    participating in the same problem; labels must lie in 1..category_count.
    """

    domain_id: str
    samples: tuple
    feature_dim: int
    category_count: int

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        for s in self.samples:
            if s.features.shape[0] != self.feature_dim:
                raise DimensionError(
                    f"domain {self.domain_id!r}: sample has "
                    f"{s.features.shape[0]} features, expected {self.feature_dim}"
                )
            if s.label > self.category_count:
                raise InvalidCategoryError(
                    f"domain {self.domain_id!r}: label {s.label} exceeds "
                    f"category count {self.category_count}"
                )

    def __len__(self) -> int:
        return len(self.samples)

    @cached_property
    def feature_matrix(self) -> np.ndarray:
        """All features stacked into an (N, feature_dim) array."""
        if not self.samples:
            return np.zeros((0, self.feature_dim))
        return np.vstack([s.features for s in self.samples])

    @cached_property
    def labels(self) -> np.ndarray:
        """All labels as an (N,) int array, 1-based."""
        return np.array([s.label for s in self.samples], dtype=np.int64)

    @staticmethod
    def from_arrays(domain_id: str, features: np.ndarray, labels,
                    category_count: int) -> "DomainDataset":
        features = np.asarray(features, dtype=np.float64)
        samples = [
            LabeledSample(features[i], int(labels[i]), domain_id)
            for i in range(features.shape[0])
        ]
        return DomainDataset(domain_id, tuple(samples), features.shape[1],
                             category_count)


@dataclass(frozen=True, eq=False)
class Normalization:
    """Per-feature affine transform x -> (x - mean) / scale."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _as_vector(self.mean))
        object.__setattr__(self, "scale", _as_vector(self.scale))
        if self.mean.shape != self.scale.shape:
            raise DimensionError("normalization mean and scale differ in length")
        if np.any(self.scale <= 0):
            raise DimensionError("normalization scales must be positive")

    def apply(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=np.float64) - self.mean) / self.scale


@dataclass(frozen=True, eq=False)
class SourceModel:
    """A fixed prior classifier: the anchor every adaptation pulls toward."""

    weights: np.ndarray
    feature_dim: int
    category_count: int
    bias_appended: bool = False
    normalization: Normalization | None = None

    def __post_init__(self):
        object.__setattr__(self, "weights", _as_vector(self.weights))
        expected = self.category_count * self.feature_dim
        if self.weights.shape[0] != expected:
            raise DimensionError(
                f"source weights have length {self.weights.shape[0]}, "
                f"expected {self.category_count} * {self.feature_dim} = {expected}"
            )
        if self.normalization is not None:
            if self.normalization.mean.shape[0] != self.feature_dim:
                raise DimensionError(
                    "normalization length does not match feature dimension"
                )


def joint_feature(x, label: int, category_count: int) -> np.ndarray:
    """Place x into the label-th slot of a K*n vector, zeros elsewhere."""
    x = _as_vector(x)
    if not 1 <= label <= category_count:
        raise InvalidCategoryError(
            f"category {label} out of range 1..{category_count}"
        )
    n = x.shape[0]
    out = np.zeros(category_count * n)
    out[(label - 1) * n:label * n] = x
    return out


def _split_slots(w, x) -> tuple[np.ndarray, np.ndarray, int]:
    w = _as_vector(w)
    x = _as_vector(x)
    n = x.shape[0]
    if n == 0 or w.shape[0] % n != 0:
        raise DimensionError(
            f"weight length {w.shape[0]} is not a multiple of "
            f"feature length {n}"
        )
    return w, x, w.shape[0] // n


def score(w, x, label: int) -> float:
    """Dot product of the label-th weight slot with x."""
    w, x, category_count = _split_slots(w, x)
    if not 1 <= label <= category_count:
        raise InvalidCategoryError(
            f"category {label} out of range 1..{category_count}"
        )
    n = x.shape[0]
    return float(w[(label - 1) * n:label * n] @ x)


def category_scores(w, x) -> np.ndarray:
    """Scores of every category slot against x, as a (K,) array."""
    w, x, category_count = _split_slots(w, x)
    return w.reshape(category_count, x.shape[0]) @ x


def predict(w, x) -> int:
    """Highest-scoring category; ties broken by the lowest index."""
    scores = category_scores(w, x)
    if scores.shape[0] < 2:
        raise DegenerateProblemError(
            "prediction requires at least two categories"
        )
    return int(np.argmax(scores)) + 1


def predict_batch(w, features: np.ndarray, category_count: int) -> np.ndarray:
    """Predicted labels for every row of an (N, n) feature matrix."""
    if category_count < 2:
        raise DegenerateProblemError(
            "prediction requires at least two categories"
        )
    w = _as_vector(w)
    features = np.asarray(features, dtype=np.float64)
    if w.shape[0] != category_count * features.shape[1]:
        raise DimensionError(
            f"weight length {w.shape[0]} does not match "
            f"{category_count} categories x {features.shape[1]} features"
        )
    scores = features @ w.reshape(category_count, -1).T
    return np.argmax(scores, axis=1) + 1


def pool_datasets(datasets: Sequence[DomainDataset]) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate feature matrices and labels of several datasets."""
    if not datasets:
        raise DimensionError("cannot pool an empty dataset collection")
    dims = {d.feature_dim for d in datasets}
    cats = {d.category_count for d in datasets}
    if len(dims) != 1 or len(cats) != 1:
        raise DimensionError(
            "pooled datasets must share feature dimension and category count"
        )
    X = np.concatenate([d.feature_matrix for d in datasets], axis=0)
    y = np.concatenate([d.labels for d in datasets])
    return X, y
