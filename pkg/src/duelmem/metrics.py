"""Diagnostics for memory composition and representation quality."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .kernels import normalize

__all__ = [
    "MetricsRow",
    "ProbeConfig",
    "class_centroid",
    "class_entropy",
    "class_frequency_histogram",
    "dominant_fraction",
    "inter_class_similarity",
    "intra_class_variance",
    "linear_probe",
    "metrics_header",
    "write_metrics_csv",
]


def class_entropy(labels: np.ndarray) -> float:
    """Shannon entropy (nats) of the empirical class distribution."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("labels must be nonempty")
    _, counts = np.unique(labels, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def class_centroid(embeddings: np.ndarray) -> np.ndarray:
    """Normalized mean embedding; errors when the mean vanishes."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or embeddings.shape[0] == 0:
        raise ValueError("expected a nonempty (n, z) array")
    mean = embeddings.mean(axis=0)
    if np.linalg.norm(mean) == 0.0:
        raise ValueError("class centroid undefined: mean embedding is zero")
    return normalize(mean)


def intra_class_variance(embeddings: np.ndarray, labels: np.ndarray) -> float:
    """Mean squared gap between 1 and alignment with the class centroid.

    (1/|C|) * sum_c mean_{x in c} (r_c . z(x) - 1)^2 with r_c the class
    centroid. 0 exactly when every class collapses to a single direction.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    total = 0.0
    for c in classes:
        block = embeddings[labels == c]
        r = class_centroid(block)
        total += float(((block @ r - 1.0) ** 2).mean())
    return total / classes.size


def inter_class_similarity(embeddings: np.ndarray, labels: np.ndarray) -> float:
    """Mean cosine between centroids over ordered pairs of distinct classes."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError("inter-class similarity needs >= 2 classes")
    cents = np.vstack([class_centroid(embeddings[labels == c]) for c in classes])
    G = cents @ cents.T
    n = classes.size
    return float((G.sum() - np.trace(G)) / (n * (n - 1)))


def class_frequency_histogram(labels: np.ndarray) -> np.ndarray:
    """Per-class counts, sorted descending."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return np.zeros(0, dtype=np.int64)
    _, counts = np.unique(labels, return_counts=True)
    return np.sort(counts)[::-1].astype(np.int64)


def dominant_fraction(labels: np.ndarray, dominant_class: int = 0) -> float:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("labels must be nonempty")
    return float((labels == dominant_class).mean())


@dataclass(frozen=True)
class ProbeConfig:
    lr: float = 1e-3
    weight_decay: float = 1e-6
    steps: int = 200

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


def linear_probe(
    train_X: np.ndarray,
    train_y: np.ndarray,
    test_X: np.ndarray,
    test_y: np.ndarray,
    config: ProbeConfig = ProbeConfig(),
) -> float:
    """Accuracy of a multinomial-logistic readout on frozen features.

    Full-batch Adam from zero weights; weight decay folded into the
    gradient. Deterministic: no randomness anywhere.
    """
    train_X = np.asarray(train_X, dtype=np.float64)
    test_X = np.asarray(test_X, dtype=np.float64)
    train_y = np.asarray(train_y)
    test_y = np.asarray(test_y)
    classes = np.unique(train_y)
    if classes.size < 2:
        raise ValueError("probe training set must contain >= 2 classes")
    index = {c: i for i, c in enumerate(classes)}
    y = np.array([index[c] for c in train_y])
    n, d = train_X.shape
    k = classes.size

    W = np.zeros((k, d))
    b = np.zeros(k)
    mW = np.zeros_like(W)
    vW = np.zeros_like(W)
    mb = np.zeros_like(b)
    vb = np.zeros_like(b)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    onehot = np.zeros((n, k))
    onehot[np.arange(n), y] = 1.0

    for t in range(1, config.steps + 1):
        logits = train_X @ W.T + b
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        probs = e / e.sum(axis=1, keepdims=True)
        gap = (probs - onehot) / n
        gW = gap.T @ train_X + config.weight_decay * W
        gb = gap.sum(axis=0)
        mW = beta1 * mW + (1 - beta1) * gW
        vW = beta2 * vW + (1 - beta2) * gW**2
        mb = beta1 * mb + (1 - beta1) * gb
        vb = beta2 * vb + (1 - beta2) * gb**2
        c1, c2 = 1 - beta1**t, 1 - beta2**t
        W -= config.lr * (mW / c1) / (np.sqrt(vW / c2) + eps)
        b -= config.lr * (mb / c1) / (np.sqrt(vb / c2) + eps)

    pred = classes[np.argmax(test_X @ W.T + b, axis=1)]
    return float((pred == test_y).mean())


METRICS_FIELDS = (
    "step",
    "loss",
    "lr",
    "class_entropy",
    "v_intra",
    "s_inter",
    "mean_mem_distinct",
    "dominant_frac",
    "probe_acc",
)


@dataclass
class MetricsRow:
    step: int
    loss: float
    lr: float
    class_entropy: float
    v_intra: float
    s_inter: float
    mean_mem_distinct: float
    dominant_frac: float
    probe_acc: float | None = None

    def as_csv(self) -> list[str]:
        cells = [str(self.step)]
        for value in (
            self.loss,
            self.lr,
            self.class_entropy,
            self.v_intra,
            self.s_inter,
            self.mean_mem_distinct,
            self.dominant_frac,
        ):
            cells.append(repr(float(value)))
        cells.append("" if self.probe_acc is None else repr(float(self.probe_acc)))
        return cells


def metrics_header() -> list[str]:
    return list(METRICS_FIELDS)


def write_metrics_csv(path, rows: list[MetricsRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(metrics_header())
        for row in rows:
            writer.writerow(row.as_csv())
