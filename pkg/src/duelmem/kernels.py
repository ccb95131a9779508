"""Similarity kernels that turn embedding geometry into duplication probabilities.

A kernel maps a pair of unit embeddings (or their hidden labels) to the
probability q in [0, 1] that the two samples are duplicates, i.e. share a
latent class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "AffineCosine",
    "ExponentialTemp",
    "Kernel",
    "LabelOracle",
    "cosine",
    "mdp",
    "normalize",
    "pair_scores",
    "self_scores",
]


def normalize(v: np.ndarray) -> np.ndarray:
    """Return v scaled to unit L2 norm. Rows are normalized for 2-d input."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("embedding contains non-finite values")
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("cannot normalize a zero vector")
    return v / norms


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two unit embeddings (a plain dot product)."""
    return float(np.clip(np.dot(a, b), -1.0, 1.0))


@dataclass(frozen=True)
class ExponentialTemp:
    """q = exp((s - 1) / tau) for cosine s. q(1) = 1; strictly positive."""

    tau: float

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ValueError("tau must be > 0")

    def from_cosine(self, s: np.ndarray) -> np.ndarray:
        return np.exp((np.asarray(s, dtype=np.float64) - 1.0) / self.tau)


@dataclass(frozen=True)
class AffineCosine:
    """q = (1 + s) / 2 for cosine s. Maps [-1, 1] onto [0, 1]."""

    def from_cosine(self, s: np.ndarray) -> np.ndarray:
        return (1.0 + np.asarray(s, dtype=np.float64)) / 2.0


@dataclass(frozen=True)
class LabelOracle:
    """q = 1 iff hidden labels match.

    Stands in for a perfect extractor in diagnostics and tests; it is the
    only kernel that reads labels.
    """


Kernel = ExponentialTemp | AffineCosine | LabelOracle


def pair_scores(
    X: np.ndarray,
    Y: np.ndarray,
    kernel: Kernel,
    labels_x: np.ndarray | None = None,
    labels_y: np.ndarray | None = None,
) -> np.ndarray:
    """Duplication probabilities for every (row of X, row of Y) pair.

    X is (n, z), Y is (m, z); the result is (n, m). Cosines are clipped to
    [-1, 1] before the kernel is applied so that float drift in the dot
    products cannot push q outside its range.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[1]:
        raise ValueError("pair_scores expects 2-d inputs with matching width")
    if isinstance(kernel, LabelOracle):
        if labels_x is None or labels_y is None:
            raise ValueError("LabelOracle kernel requires labels for both sides")
        lx = np.asarray(labels_x).reshape(-1, 1)
        ly = np.asarray(labels_y).reshape(1, -1)
        return (lx == ly).astype(np.float64)
    s = np.clip(X @ Y.T, -1.0, 1.0)
    return kernel.from_cosine(s)


def self_scores(
    X: np.ndarray, kernel: Kernel, labels: np.ndarray | None = None
) -> np.ndarray:
    """Square matrix of pairwise duplication probabilities within X."""
    return pair_scores(X, X, kernel, labels, labels)


def mdp(
    a: np.ndarray,
    b: np.ndarray,
    kernel: Kernel,
    label_a: int | None = None,
    label_b: int | None = None,
) -> float:
    """Mutual duplication probability of a single embedding pair."""
    if isinstance(kernel, LabelOracle):
        if label_a is None or label_b is None:
            raise ValueError("LabelOracle kernel requires labels for both sides")
        return 1.0 if label_a == label_b else 0.0
    return float(kernel.from_cosine(cosine(a, b)))
