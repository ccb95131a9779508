"""Capacity-bounded active memory with duplicate-eliminating eviction.

The DUEL policy evicts the entry with minimum distinctiveness, i.e. the one
most duplicated by the rest of the memory. Because -log is monotone, that is
the entry with the largest row sum of the pairwise duplication-score matrix
(self pair included), so the policy can be driven entirely by cached row
sums.

Batched updates follow a selection-mask scheme over the combined
[memory; batch] score matrix, computed once per call:

  * rows start selected for memory entries and deselected for the batch;
  * per batch element: pick the selected row with the largest live score
    (lowest index on ties, grouped at _TIE_TOL), subtract its masked row from
    the live scores and zero it, then add the incoming row's masked scores,
    mark it selected, and credit it its own masked row sum plus MAX_SCORE for
    the self pair.

Elements inserted earlier in the same call are therefore eviction candidates
for later elements. `duel_naive` replays the same candidate pool but
recomputes every score from scratch per replacement; both paths must produce
identical eviction logs.

Eviction-log coordinates: DUEL events report the victim's index in the
combined pool (entry order at call start, then batch order); the baseline
policies (fifo, random, reservoir) replace slots in place and report the
slot index. Appends below capacity report None.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .information import FiniteDistribution
from .kernels import AffineCosine, Kernel, LabelOracle, pair_scores, self_scores

__all__ = [
    "MAX_SCORE",
    "POLICIES",
    "ActiveMemory",
    "EvictionEvent",
    "MemoryEntry",
    "duel_update_incremental",
    "duel_update_naive",
    "fifo_update",
    "random_update",
    "reservoir_update",
    "guarded_update",
]

# Score credited to a freshly inserted row for its self pair, q(i, i) = 1.
MAX_SCORE = 1.0

POLICIES = ("duel", "duel_naive", "fifo", "random", "reservoir")

UNLABELED = -1

# Exact duplicates tie exactly under a fresh recompute but only to within
# summation noise on the incrementally maintained scores. Grouping ties at
# this tolerance (far above accumulated drift, far below genuine score gaps)
# makes both paths break them identically, toward the lowest index.
_TIE_TOL = 1e-9


def _tied_argmax(values: np.ndarray) -> int:
    """Lowest index among entries within _TIE_TOL of the maximum."""
    return int(np.flatnonzero(values >= values.max() - _TIE_TOL)[0])


@dataclass(frozen=True)
class MemoryEntry:
    embedding: np.ndarray
    hidden_label: int | None
    insert_step: int


@dataclass(frozen=True)
class EvictionEvent:
    """One insertion: which entry it displaced (None for a plain append)."""

    evicted: int | None
    inserted: int


class ActiveMemory:
    """Fixed-capacity store of unit embeddings under an eviction policy.

    Labels ride along for diagnostics only; no policy reads them unless the
    kernel itself is a LabelOracle (a test fixture).
    """

    def __init__(
        self,
        capacity: int,
        dim: int,
        kernel: Kernel | None = None,
        policy: str = "duel",
        seed: int = 0,
    ):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
        self.capacity = int(capacity)
        self.dim = int(dim)
        self.kernel = kernel if kernel is not None else AffineCosine()
        self.policy = policy
        self.rng = np.random.default_rng(seed)
        self._emb = np.zeros((capacity, dim))
        self._labels = np.full(capacity, UNLABELED, dtype=np.int64)
        self._steps = np.zeros(capacity, dtype=np.int64)
        self._scores = np.zeros(capacity)
        self._count = 0
        self._seen = 0  # items offered so far; also the next insert id

    @classmethod
    def from_arrays(
        cls,
        embeddings: np.ndarray,
        labels: np.ndarray | None = None,
        capacity: int | None = None,
        kernel: Kernel | None = None,
        policy: str = "duel",
        seed: int = 0,
    ) -> "ActiveMemory":
        """Build a memory pre-filled with the given entries."""
        embeddings = np.asarray(embeddings, dtype=np.float64)
        n = embeddings.shape[0]
        mem = cls(capacity or n, embeddings.shape[1], kernel, policy, seed)
        mem.push_batch(embeddings, labels)
        return mem

    # -- views ------------------------------------------------------------

    @property
    def size(self) -> int:
        return self._count

    @property
    def is_full(self) -> bool:
        return self._count == self.capacity

    @property
    def embeddings(self) -> np.ndarray:
        return self._emb[: self._count].copy()

    @property
    def labels(self) -> np.ndarray:
        return self._labels[: self._count].copy()

    @property
    def insert_steps(self) -> np.ndarray:
        return self._steps[: self._count].copy()

    @property
    def scores(self) -> np.ndarray:
        """Cached duplication-score row sums, self pair included."""
        return self._scores[: self._count].copy()

    def entries(self) -> list[MemoryEntry]:
        return [
            MemoryEntry(
                self._emb[i].copy(),
                None if self._labels[i] == UNLABELED else int(self._labels[i]),
                int(self._steps[i]),
            )
            for i in range(self._count)
        ]

    def as_distribution(self) -> FiniteDistribution:
        if self._count == 0:
            raise ValueError("memory is empty")
        return FiniteDistribution.uniform(self.embeddings, self.labels)

    # -- scores -----------------------------------------------------------

    def _kernel_labels(self, labels: np.ndarray) -> np.ndarray | None:
        if isinstance(self.kernel, LabelOracle):
            if np.any(labels == UNLABELED):
                raise ValueError("LabelOracle kernel requires labeled entries")
            return labels
        return None

    def recomputed_scores(self) -> np.ndarray:
        """Row sums recomputed from scratch; the cache-coherence oracle."""
        n = self._count
        if n == 0:
            return np.zeros(0)
        S = self_scores(
            self._emb[:n], self.kernel, self._kernel_labels(self._labels[:n])
        )
        return S.sum(axis=1)

    def _refresh_scores(self) -> None:
        self._scores[: self._count] = self.recomputed_scores()

    # -- selection --------------------------------------------------------

    def duel_select_by_score(self) -> int:
        """Index of the most duplicated entry: argmax of cached row sums."""
        if self._count == 0:
            raise ValueError("memory is empty")
        return _tied_argmax(self._scores[: self._count])

    def duel_select_naive(self) -> int:
        """Same selection via per-entry distinctiveness, computed fresh.

        argmin of -log(mean q) is argmax of the row sums; ties group on the
        row-sum scale so the two paths agree bitwise.
        """
        n = self._count
        if n == 0:
            raise ValueError("memory is empty")
        S = self_scores(
            self._emb[:n], self.kernel, self._kernel_labels(self._labels[:n])
        )
        return _tied_argmax(S.sum(axis=1))

    # -- updates ----------------------------------------------------------

    def push_batch(
        self, embeddings: np.ndarray, labels: np.ndarray | None = None
    ) -> list[EvictionEvent]:
        """Offer a batch of embeddings to the memory under its policy.

        Returns one EvictionEvent per accepted item, in offer order.
        """
        X = np.asarray(embeddings, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.dim:
            raise ValueError(f"expected dim {self.dim}, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise ValueError("batch contains non-finite values")
        norms = np.linalg.norm(X, axis=1)
        if not np.all(np.abs(norms - 1.0) <= 1e-9):
            raise ValueError("batch embeddings must be unit-norm within 1e-9")
        if labels is None:
            lab = np.full(X.shape[0], UNLABELED, dtype=np.int64)
        else:
            lab = np.asarray(labels, dtype=np.int64).reshape(-1)
            if lab.shape[0] != X.shape[0]:
                raise ValueError("labels must align with the batch")
        if isinstance(self.kernel, LabelOracle) and labels is None:
            raise ValueError("LabelOracle kernel requires labeled entries")

        events: list[EvictionEvent] = []
        start = 0
        appended = False
        while self._count < self.capacity and start < X.shape[0]:
            slot = self._count
            self._emb[slot] = X[start]
            self._labels[slot] = lab[start]
            self._steps[slot] = self._seen
            events.append(EvictionEvent(None, self._seen))
            self._count += 1
            self._seen += 1
            start += 1
            appended = True
        if appended:
            self._refresh_scores()
        if start == X.shape[0]:
            return events

        rest, rest_lab = X[start:], lab[start:]
        handler = {
            "duel": self._push_duel,
            "duel_naive": self._push_duel_naive,
            "fifo": self._push_fifo,
            "random": self._push_random,
            "reservoir": self._push_reservoir,
        }[self.policy]
        events.extend(handler(rest, rest_lab))
        return events

    def _combined(self, X: np.ndarray, lab: np.ndarray):
        k, b = self._count, X.shape[0]
        emb = np.vstack([self._emb[:k], X])
        labels = np.concatenate([self._labels[:k], lab])
        ids = np.concatenate(
            [self._steps[:k], self._seen + np.arange(b, dtype=np.int64)]
        )
        S = self_scores(emb, self.kernel, self._kernel_labels(labels))
        return k, b, emb, labels, ids, S

    def _compact(self, selection, emb, labels, ids, live_scores=None) -> None:
        keep = np.flatnonzero(selection)
        self._count = keep.size
        self._emb[: self._count] = emb[keep]
        self._labels[: self._count] = labels[keep]
        self._steps[: self._count] = ids[keep]
        if live_scores is None:
            self._refresh_scores()
        else:
            self._scores[: self._count] = live_scores[keep]

    def _push_duel(self, X: np.ndarray, lab: np.ndarray) -> list[EvictionEvent]:
        k, b, emb, labels, ids, S = self._combined(X, lab)
        selection = np.concatenate([np.ones(k, dtype=bool), np.zeros(b, dtype=bool)])
        score = np.concatenate([S[:k, :k].sum(axis=1), np.zeros(b)])
        events = []
        for i in range(k, k + b):
            j = _tied_argmax(score)
            score -= S[j] * selection
            selection[j] = False
            score[j] = 0.0
            t = S[i] * selection
            score += t
            selection[i] = True
            score[i] = t.sum() + MAX_SCORE
            events.append(EvictionEvent(j, int(ids[i])))
        self._seen += b
        self._compact(selection, emb, labels, ids, live_scores=score)
        return events

    def _push_duel_naive(self, X: np.ndarray, lab: np.ndarray) -> list[EvictionEvent]:
        """Reference DUEL path: full score recomputation per replacement."""
        k, b, emb, labels, ids, S = self._combined(X, lab)
        selection = np.concatenate([np.ones(k, dtype=bool), np.zeros(b, dtype=bool)])
        events = []
        for i in range(k, k + b):
            sel = np.flatnonzero(selection)
            sums = S[np.ix_(sel, sel)].sum(axis=1)
            j = int(sel[_tied_argmax(sums)])
            selection[j] = False
            selection[i] = True
            events.append(EvictionEvent(j, int(ids[i])))
        self._seen += b
        self._compact(selection, emb, labels, ids)
        return events

    def _push_fifo(self, X: np.ndarray, lab: np.ndarray) -> list[EvictionEvent]:
        events = []
        for r in range(X.shape[0]):
            victim = int(np.argmin(self._steps[: self._count]))
            self._replace(victim, X[r], lab[r])
            events.append(EvictionEvent(victim, self._seen - 1))
        self._refresh_scores()
        return events

    def _push_random(self, X: np.ndarray, lab: np.ndarray) -> list[EvictionEvent]:
        events = []
        for r in range(X.shape[0]):
            victim = int(self.rng.integers(self._count))
            self._replace(victim, X[r], lab[r])
            events.append(EvictionEvent(victim, self._seen - 1))
        self._refresh_scores()
        return events

    def _push_reservoir(self, X: np.ndarray, lab: np.ndarray) -> list[EvictionEvent]:
        """Keep each offered item with probability capacity / seen_count."""
        events = []
        replaced = False
        for r in range(X.shape[0]):
            self._seen += 1
            if self.rng.random() < self.capacity / self._seen:
                victim = int(self.rng.integers(self._count))
                self._emb[victim] = X[r]
                self._labels[victim] = lab[r]
                self._steps[victim] = self._seen - 1
                events.append(EvictionEvent(victim, self._seen - 1))
                replaced = True
        if replaced:
            self._refresh_scores()
        return events

    def _replace(self, victim: int, emb: np.ndarray, label: int) -> None:
        self._emb[victim] = emb
        self._labels[victim] = label
        self._steps[victim] = self._seen
        self._seen += 1

    # -- probes and sampling ----------------------------------------------

    def mean_distinctiveness(
        self,
        probe_embeddings: np.ndarray | None = None,
        probe_labels: np.ndarray | None = None,
    ) -> float:
        """Mean -log(mean duplication score against memory) over the probe.

        Defaults to probing with the memory's own entries.
        """
        if self._count == 0:
            raise ValueError("memory is empty")
        if probe_embeddings is None:
            probe_embeddings = self._emb[: self._count]
            probe_labels = self._labels[: self._count]
        probe_embeddings = np.asarray(probe_embeddings, dtype=np.float64)
        mem_labels = self._kernel_labels(self._labels[: self._count])
        if isinstance(self.kernel, LabelOracle) and probe_labels is None:
            raise ValueError("LabelOracle kernel requires probe labels")
        Q = pair_scores(
            probe_embeddings,
            self._emb[: self._count],
            self.kernel,
            None if probe_labels is None else np.asarray(probe_labels),
            mem_labels,
        )
        with np.errstate(divide="ignore"):
            distinct = -np.log(Q.mean(axis=1))
        return float(distinct.mean())

    def sample_negatives(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n entries drawn uniformly; without replacement when n <= size."""
        if self._count == 0:
            raise ValueError("memory is empty")
        if n < 0:
            raise ValueError("n must be >= 0")
        replace = n > self._count
        idx = rng.choice(self._count, size=n, replace=replace)
        return self._emb[idx].copy()

    # -- persistence ------------------------------------------------------

    def snapshot_csv(self, path) -> None:
        """Write `index,label,insert_step,score,v_0..v_{z-1}` rows."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["index", "label", "insert_step", "score"]
                + [f"v_{d}" for d in range(self.dim)]
            )
            for i in range(self._count):
                label = "" if self._labels[i] == UNLABELED else int(self._labels[i])
                writer.writerow(
                    [i, label, int(self._steps[i]), repr(float(self._scores[i]))]
                    + [repr(float(v)) for v in self._emb[i]]
                )

    def state_dict(self) -> dict:
        return {
            "emb": self._emb.copy(),
            "labels": self._labels.copy(),
            "steps": self._steps.copy(),
            "scores": self._scores.copy(),
            "count": self._count,
            "seen": self._seen,
            "rng": self.rng.bit_generator.state,
        }

    def load_state_dict(self, state: dict) -> None:
        self._emb = state["emb"].copy()
        self._labels = state["labels"].copy()
        self._steps = state["steps"].copy()
        self._scores = state["scores"].copy()
        self._count = int(state["count"])
        self._seen = int(state["seen"])
        self.rng.bit_generator.state = state["rng"]


def _update_with_policy(
    mem: ActiveMemory,
    policy: str,
    embeddings: np.ndarray,
    labels: np.ndarray | None,
) -> list[EvictionEvent]:
    previous = mem.policy
    mem.policy = policy
    try:
        return mem.push_batch(embeddings, labels)
    finally:
        mem.policy = previous


def duel_update_incremental(
    mem: ActiveMemory, embeddings: np.ndarray, labels: np.ndarray | None = None
) -> list[EvictionEvent]:
    """One batched DUEL update via the incremental masked-score path."""
    return _update_with_policy(mem, "duel", embeddings, labels)


def duel_update_naive(
    mem: ActiveMemory, embeddings: np.ndarray, labels: np.ndarray | None = None
) -> list[EvictionEvent]:
    """One batched DUEL update via the full-recompute reference path."""
    return _update_with_policy(mem, "duel_naive", embeddings, labels)


def fifo_update(
    mem: ActiveMemory, embeddings: np.ndarray, labels: np.ndarray | None = None
) -> list[EvictionEvent]:
    """Replace the oldest entries with the batch."""
    return _update_with_policy(mem, "fifo", embeddings, labels)


def random_update(
    mem: ActiveMemory, embeddings: np.ndarray, labels: np.ndarray | None = None
) -> list[EvictionEvent]:
    """Replace uniformly random entries with the batch (memory's own rng)."""
    return _update_with_policy(mem, "random", embeddings, labels)


def reservoir_update(
    mem: ActiveMemory, embeddings: np.ndarray, labels: np.ndarray | None = None
) -> list[EvictionEvent]:
    """Reservoir-sample the batch: keep each item w.p. capacity/seen."""
    return _update_with_policy(mem, "reservoir", embeddings, labels)


def guarded_update(
    mem: ActiveMemory,
    embeddings: np.ndarray,
    labels: np.ndarray | None,
    probe_embeddings: np.ndarray,
    probe_labels: np.ndarray | None = None,
) -> tuple[list[EvictionEvent], bool]:
    """Apply push_batch, reverting it if probe distinctiveness drops.

    The probe stands in for the current data distribution. The update is
    kept when the probe's mean distinctiveness against the memory does not
    strictly decrease (a 1e-12 slack absorbs summation-order noise);
    otherwise the memory is restored and applied is False.
    """
    probe_embeddings = np.asarray(probe_embeddings, dtype=np.float64)
    if probe_embeddings.size == 0:
        raise ValueError("probe must be nonempty")
    before = mem.mean_distinctiveness(probe_embeddings, probe_labels)
    saved = mem.state_dict()
    events = mem.push_batch(embeddings, labels)
    after = mem.mean_distinctiveness(probe_embeddings, probe_labels)
    if after < before - 1e-12:
        mem.load_state_dict(saved)
        return events, False
    return events, True
