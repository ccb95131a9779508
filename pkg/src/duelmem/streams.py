"""Synthetic class-imbalanced data streams and embedding-stream files.

Samples arrive one pair at a time: draw a hidden class from an imbalance
profile, draw x around the class mean, and produce a positive view x+ by
adding augmentation noise to x.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .kernels import normalize

__all__ = [
    "Dominant",
    "GaussianPairStream",
    "LongTail",
    "StreamConfig",
    "class_means",
    "class_probs",
    "load_embedding_stream",
    "longtail_probs",
    "oracle_embedding_stream",
    "sample_class",
    "sample_pair",
    "write_embedding_csv",
]


@dataclass(frozen=True)
class Dominant:
    """One class takes rho_max; the rest share the remainder equally."""

    rho_max: float

    def probs(self, n_classes: int) -> np.ndarray:
        if n_classes < 2:
            raise ValueError("dominant profile needs >= 2 classes")
        if not 1.0 / n_classes <= self.rho_max < 1.0:
            raise ValueError("rho_max must lie in [1/|C|, 1)")
        rho_min = (1.0 - self.rho_max) / (n_classes - 1)
        p = np.full(n_classes, rho_min)
        p[0] = self.rho_max
        return p


@dataclass(frozen=True)
class LongTail:
    """Geometric decay by class rank with head/tail frequency ratio."""

    ratio: float

    def probs(self, n_classes: int) -> np.ndarray:
        return longtail_probs(n_classes, self.ratio)


Imbalance = Dominant | LongTail


def longtail_probs(n_classes: int, ratio: float) -> np.ndarray:
    """p_c proportional to ratio^(-rank/(|C|-1)), so p_0/p_last = ratio."""
    if n_classes < 1:
        raise ValueError("n_classes must be >= 1")
    if not ratio >= 1:
        raise ValueError("ratio must be >= 1")
    if n_classes == 1:
        return np.ones(1)
    ranks = np.arange(n_classes)
    raw = ratio ** (-ranks / (n_classes - 1))
    return raw / raw.sum()


@dataclass(frozen=True)
class StreamConfig:
    n_classes: int = 10
    d_in: int = 32
    separation: float = 1.0
    sigma: float = 0.35
    sigma_aug: float = 0.35
    imbalance: Imbalance = Dominant(0.75)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_classes < 1:
            raise ValueError("n_classes must be >= 1")
        if self.d_in < 1:
            raise ValueError("d_in must be >= 1")
        if self.separation <= 0:
            raise ValueError("separation must be > 0")
        if self.sigma < 0 or self.sigma_aug < 0:
            raise ValueError("noise scales must be >= 0")
        self.imbalance.probs(self.n_classes)  # validates the profile

    def probs(self) -> np.ndarray:
        return self.imbalance.probs(self.n_classes)


def class_probs(cfg: StreamConfig) -> np.ndarray:
    return cfg.probs()


def class_means(cfg: StreamConfig) -> np.ndarray:
    """Class mean directions scaled by the separation radius.

    Orthonormal via QR when the ambient dimension allows it, otherwise
    independent random unit directions.
    """
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xC1A55]))
    raw = rng.normal(size=(cfg.d_in, max(cfg.n_classes, 1)))
    if cfg.d_in >= cfg.n_classes:
        q, r = np.linalg.qr(raw[:, : cfg.n_classes])
        signs = np.sign(np.diag(r))
        signs[signs == 0] = 1.0
        q *= signs  # fix sign convention for determinism
        dirs = q.T
    else:
        dirs = normalize(raw.T[: cfg.n_classes])
    return cfg.separation * dirs


def sample_class(cfg: StreamConfig, rng: np.random.Generator) -> int:
    """Draw a hidden class index from the imbalance profile."""
    return int(rng.choice(cfg.n_classes, p=cfg.probs()))


def sample_pair(
    cfg: StreamConfig,
    rng: np.random.Generator,
    means: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, int]:
    """(x, x+, hidden class): x ~ N(mean_c, sigma^2 I), x+ = x + aug noise."""
    if means is None:
        means = class_means(cfg)
    c = sample_class(cfg, rng)
    x = means[c] + cfg.sigma * rng.normal(size=cfg.d_in)
    x_pos = x + cfg.sigma_aug * rng.normal(size=cfg.d_in)
    return x, x_pos, c


class GaussianPairStream:
    """Stateful sampler around sample_pair with cached class means."""

    def __init__(self, cfg: StreamConfig, seed: int | None = None):
        self.cfg = cfg
        self.means = class_means(cfg)
        self.rng = np.random.default_rng(cfg.seed if seed is None else seed)

    def sample_batch(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        X = np.empty((n, self.cfg.d_in))
        Xp = np.empty((n, self.cfg.d_in))
        labels = np.empty(n, dtype=np.int64)
        for i in range(n):
            X[i], Xp[i], labels[i] = sample_pair(self.cfg, self.rng, self.means)
        return X, Xp, labels

    def sample_balanced(
        self, per_class: int, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray]:
        """Evaluation set: per_class draws of x for every class."""
        n = per_class * self.cfg.n_classes
        X = np.empty((n, self.cfg.d_in))
        labels = np.repeat(np.arange(self.cfg.n_classes), per_class)
        for i, c in enumerate(labels):
            X[i] = self.means[c] + self.cfg.sigma * rng.normal(size=self.cfg.d_in)
        return X, labels


def oracle_embedding_stream(
    n_classes: int,
    rng: np.random.Generator,
    probs: np.ndarray | None = None,
    dim: int | None = None,
):
    """Yield (basis-vector embedding, label) pairs forever.

    Class c maps to the standard basis vector e_c, the embedding a perfect
    extractor would produce. dim defaults to n_classes and must be at least
    n_classes.
    """
    if dim is None:
        dim = n_classes
    if n_classes > dim:
        raise ValueError("n_classes must not exceed the embedding dimension")
    if probs is None:
        probs = np.full(n_classes, 1.0 / n_classes)
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (n_classes,) or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("probs must be a distribution over the classes")
    eye = np.eye(dim)
    while True:
        c = int(rng.choice(n_classes, p=probs))
        yield eye[c].copy(), c


# -- embedding-stream files ---------------------------------------------------

_NORM_SLACK = 1e-6


def write_embedding_csv(
    path,
    embeddings: np.ndarray,
    labels: np.ndarray | None = None,
    ids: np.ndarray | None = None,
) -> None:
    """Write `id,label,v_0..v_{z-1}` rows; empty label column if unlabeled."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    n, z = embeddings.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label"] + [f"v_{d}" for d in range(z)])
        for i in range(n):
            row_id = i if ids is None else ids[i]
            label = "" if labels is None else int(labels[i])
            writer.writerow(
                [row_id, label] + [repr(float(v)) for v in embeddings[i]]
            )


def load_embedding_stream(path) -> tuple[list, np.ndarray, np.ndarray]:
    """Read an embedding CSV back as (ids, labels, unit embeddings).

    Labels are -1 where the label cell is empty. Vectors are renormalized;
    a warning is emitted when a norm deviates from 1 by more than 1e-6.
    Malformed rows raise ValueError naming the line number.
    """
    ids: list = []
    labels: list[int] = []
    rows: list[np.ndarray] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row")
        if header[:2] != ["id", "label"] or len(header) < 3:
            raise ValueError(f"{path}: line 1: malformed header {header!r}")
        z = len(header) - 2
        for line_no, row in enumerate(reader, start=2):
            if len(row) != z + 2:
                raise ValueError(
                    f"{path}: line {line_no}: expected {z + 2} fields, got {len(row)}"
                )
            try:
                vec = np.array([float(v) for v in row[2:]])
            except ValueError:
                raise ValueError(f"{path}: line {line_no}: non-numeric vector entry")
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"{path}: line {line_no}: non-finite vector entry")
            norm = float(np.linalg.norm(vec))
            if norm == 0.0:
                raise ValueError(f"{path}: line {line_no}: zero vector")
            if abs(norm - 1.0) > _NORM_SLACK:
                warnings.warn(
                    f"{path}: line {line_no}: norm {norm:.6g} deviates from 1; "
                    "renormalizing",
                    stacklevel=2,
                )
            ids.append(row[0])
            labels.append(int(row[1]) if row[1] != "" else -1)
            rows.append(vec / norm)
    if rows:
        emb = np.vstack(rows)
    else:
        emb = np.zeros((0, z))
    return ids, np.asarray(labels, dtype=np.int64), emb
