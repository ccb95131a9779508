"""Eviction policies on a class-imbalanced stream of ideal embeddings.

Feeds the same dominant-class stream (70% class 0) into one fixed-capacity
memory per policy and prints what each ends up holding. Duplicate
elimination evicts whichever entry is most duplicated by the rest, so it
flattens the class histogram; fifo and random mirror the stream; reservoir
mirrors it in expectation.

Usage:
    python3 demos/memory_policies.py
"""

import numpy as np

from duelmem.memory import ActiveMemory
from duelmem.metrics import class_entropy
from duelmem.streams import oracle_embedding_stream


def main() -> None:
    n_classes, capacity, n_pushes = 8, 64, 2000
    probs = np.full(n_classes, 0.3 / (n_classes - 1))
    probs[0] = 0.7

    print(f"stream: {n_classes} classes, class 0 at p=0.7, {n_pushes} items")
    print(f"memory: capacity {capacity}\n")
    print(f"{'policy':<10} {'entropy':>8}  class histogram")
    for policy in ("duel", "fifo", "random", "reservoir"):
        stream = oracle_embedding_stream(
            n_classes, np.random.default_rng(7), probs
        )
        mem = ActiveMemory(capacity, n_classes, policy=policy, seed=7)
        for _ in range(n_pushes):
            emb, label = next(stream)
            mem.push_batch(emb[None, :], np.array([label]))
        hist = np.bincount(mem.labels, minlength=n_classes)
        print(
            f"{policy:<10} {class_entropy(mem.labels):>8.3f}  {hist.tolist()}"
        )
    print(f"\nuniform entropy would be ln {n_classes} = "
          f"{np.log(n_classes):.3f}")


if __name__ == "__main__":
    main()
