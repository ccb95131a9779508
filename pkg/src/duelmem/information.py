"""Exact information measures over finite labeled embedding distributions.

Everything here is computed by direct enumeration in float64:

  hebbian information      I_h(x) = E_{x+ ~ positives}[-log q(x, x+)]
  distinctiveness          I_d(x) = -log E_{x' ~ reference}[q(x, x')]
  contrastive objective    L      = E_x[I_h(x) - I_d(x)]

where q is a duplication-probability kernel. With a LabelOracle kernel and a
class-balanced distribution the objective reaches its optimum -log |C|, and
-log |C| lower-bounds it for every balanced distribution regardless of the
kernel or embedding geometry.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import Kernel, pair_scores, self_scores

__all__ = [
    "FiniteDistribution",
    "InfiniteInformationWarning",
    "distinctiveness_information",
    "hebbian_information",
    "hml_loss",
    "imbalance_lambda",
    "mhml_bound",
]


class InfiniteInformationWarning(RuntimeWarning):
    """Raised when a zero duplication probability drives -log q to +inf."""


def _flag_infinite(context: str) -> None:
    warnings.warn(
        f"zero duplication probability in {context}; returning inf",
        InfiniteInformationWarning,
        stacklevel=3,
    )


@dataclass
class FiniteDistribution:
    """A finite weighted set of labeled unit embeddings.

    embeddings is (n, z), labels is (n,) integers, weights is (n,)
    non-negative and sums to 1.
    """

    embeddings: np.ndarray
    labels: np.ndarray
    weights: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.embeddings.ndim != 2:
            raise ValueError("embeddings must be a (n, z) array")
        n = self.embeddings.shape[0]
        if n == 0:
            raise ValueError("distribution must contain at least one point")
        if self.labels.shape != (n,):
            raise ValueError("labels must align with embeddings")
        if self.weights is None:
            self.weights = np.full(n, 1.0 / n)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (n,):
            raise ValueError("weights must align with embeddings")
        if np.any(self.weights < 0):
            raise ValueError("weights must be non-negative")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 within 1e-12")
        norms = np.linalg.norm(self.embeddings, axis=1)
        if not np.all(np.abs(norms - 1.0) <= 1e-9):
            raise ValueError("embeddings must be unit-norm within 1e-9")

    @classmethod
    def uniform(
        cls, embeddings: np.ndarray, labels: np.ndarray
    ) -> "FiniteDistribution":
        """Equal weight on every point."""
        return cls(np.asarray(embeddings), np.asarray(labels))

    @property
    def n_points(self) -> int:
        return self.embeddings.shape[0]

    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def class_weight(self, label: int) -> float:
        return float(self.weights[self.labels == label].sum())

    def restricted_to_class(self, label: int) -> "FiniteDistribution":
        """The class conditional: same-class points, weights renormalized."""
        mask = self.labels == label
        total = self.weights[mask].sum()
        if total == 0.0:
            raise ValueError(f"class {label} has zero weight")
        return FiniteDistribution(
            self.embeddings[mask], self.labels[mask], self.weights[mask] / total
        )


def hebbian_information(
    anchor: np.ndarray,
    anchor_label: int,
    positives: FiniteDistribution,
    kernel: Kernel,
) -> float:
    """Weighted mean of -log q(anchor, x+) over the positive distribution.

    positives should be the anchor's class conditional (the anchor itself
    included). Returns +inf, with an InfiniteInformationWarning, if any
    positive has zero duplication probability with the anchor.
    """
    q = pair_scores(
        anchor[None, :],
        positives.embeddings,
        kernel,
        np.asarray([anchor_label]),
        positives.labels,
    )[0]
    if np.any((q == 0.0) & (positives.weights > 0)):
        _flag_infinite("hebbian_information")
        return math.inf
    logs = np.zeros_like(q)
    np.log(q, where=q > 0, out=logs)
    return float(-np.dot(positives.weights, logs))


def distinctiveness_information(
    anchor: np.ndarray,
    reference: FiniteDistribution,
    kernel: Kernel,
    anchor_label: int | None = None,
) -> float:
    """-log of the weighted mean duplication probability against reference.

    Returns +inf (flagged) when the mean probability is zero, i.e. the
    anchor duplicates nothing in the reference.
    """
    q = pair_scores(
        anchor[None, :],
        reference.embeddings,
        kernel,
        None if anchor_label is None else np.asarray([anchor_label]),
        reference.labels,
    )[0]
    mean_q = float(np.dot(reference.weights, q))
    if mean_q == 0.0:
        _flag_infinite("distinctiveness_information")
        return math.inf
    return -math.log(mean_q)


def hml_loss(dist: FiniteDistribution, kernel: Kernel) -> float:
    """E_x[I_h(x) - I_d(x)] by exact enumeration over the distribution.

    Per anchor, positives are the anchor's class conditional (anchor
    included, weights renormalized within the class) and the
    distinctiveness reference is the whole distribution. Infinities
    propagate flagged; an anchor hitting inf - inf yields nan.
    """
    Q = self_scores(dist.embeddings, kernel, dist.labels)
    w = dist.weights
    labels = dist.labels

    mean_q = Q @ w
    with np.errstate(divide="ignore"):
        i_d = -np.log(mean_q)
    if np.any(mean_q == 0.0):
        _flag_infinite("hml_loss distinctiveness term")

    i_h = np.zeros(dist.n_points)
    for c in dist.classes():
        mask = labels == c
        class_w = w[mask] / w[mask].sum()
        q_block = Q[np.ix_(mask, mask)]
        if np.any((q_block == 0.0) & (class_w[None, :] > 0)):
            _flag_infinite("hml_loss hebbian term")
        logs = np.zeros_like(q_block)
        np.log(q_block, where=q_block > 0, out=logs)
        logs = np.where((q_block == 0.0) & (class_w[None, :] > 0), -np.inf, logs)
        i_h[mask] = -(logs @ class_w)

    with np.errstate(invalid="ignore"):
        per_anchor = i_h - i_d
    return float(np.dot(w, per_anchor))


def imbalance_lambda(n_classes: int, rho_min: float) -> float:
    """Reweighting coefficient 1 / (|C| * rho_min) for the empirical bound."""
    if n_classes < 1:
        raise ValueError("n_classes must be >= 1")
    if not 0 < rho_min <= 1:
        raise ValueError("rho_min must lie in (0, 1]")
    return 1.0 / (n_classes * rho_min)


def mhml_bound(
    empirical: FiniteDistribution,
    memory: FiniteDistribution,
    oracle: FiniteDistribution,
    kernel: Kernel,
    rho_min: float,
    n_classes: int,
) -> float:
    """Memory-augmented upper bound on the balanced-distribution objective.

    lambda * I_h(empirical) - I_d(empirical -> memory)
        + |I_d(empirical -> memory) - I_d(oracle -> oracle)|

    with lambda = 1 / (|C| * rho_min). When empirical and oracle share
    per-class conditionals this dominates hml_loss(oracle, kernel).
    """
    lam = imbalance_lambda(n_classes, rho_min)

    i_h = 0.0
    for c in empirical.classes():
        conditional = empirical.restricted_to_class(int(c))
        mask = empirical.labels == c
        for idx in np.flatnonzero(mask):
            i_h += empirical.weights[idx] * hebbian_information(
                empirical.embeddings[idx], int(c), conditional, kernel
            )

    def mean_distinctiveness(dist: FiniteDistribution, ref: FiniteDistribution) -> float:
        total = 0.0
        for idx in range(dist.n_points):
            total += dist.weights[idx] * distinctiveness_information(
                dist.embeddings[idx], ref, kernel, int(dist.labels[idx])
            )
        return total

    i_d_mem = mean_distinctiveness(empirical, memory)
    i_d_oracle = mean_distinctiveness(oracle, oracle)
    return lam * i_h - i_d_mem + abs(i_d_mem - i_d_oracle)
