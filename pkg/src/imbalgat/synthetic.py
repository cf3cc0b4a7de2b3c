"""Synthetic citation networks in the ``.content``/``.cites`` text format.

Used by the test-suite and for timing runs when the real corpora are not at hand. Nodes carry
sparse binary bag-of-words features drawn from class-specific vocabularies; citations follow a
planted-partition model with homophily ``p_in``.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np


def generate(class_sizes, num_features: int = 100, avg_degree: float = 4.0, p_in: float = 0.8,
             words_per_node: int = 18, class_word_share: float = 0.35, seed: int = 0):
    """Return ``(node_ids, features, labels, class_names, edges)`` with edges as id pairs."""
    rng = np.random.default_rng(seed)
    labels = np.concatenate([np.full(n, c) for c, n in enumerate(class_sizes)])
    rng.shuffle(labels)
    n = labels.size
    k = len(class_sizes)
    vocab = rng.permutation(num_features)
    chunks = np.array_split(vocab, k)
    features = np.zeros((n, num_features), dtype=np.int8)
    for v in range(n):
        own = rng.random(words_per_node) < class_word_share
        pool = np.where(own, rng.choice(chunks[labels[v]], words_per_node), rng.integers(0, num_features, words_per_node))
        features[v, pool] = 1
    members = [np.flatnonzero(labels == c) for c in range(k)]
    num_edges = int(avg_degree * n / 2)
    src = rng.integers(0, n, num_edges)
    same = rng.random(num_edges) < p_in
    dst = np.where(same, [rng.choice(members[labels[s]]) for s in src], rng.integers(0, n, num_edges))
    node_ids = [str(100000 + 7 * i) for i in range(n)]
    class_names = [f"Topic_{chr(65 + c)}" for c in range(k)]
    edges = [(node_ids[a], node_ids[b]) for a, b in zip(src, dst)]
    return node_ids, features, labels, class_names, edges


def write_dataset(directory, name: str, class_sizes, class_names=None, **kw) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    node_ids, features, labels, generic, edges = generate(class_sizes, **kw)
    class_names = list(class_names) if class_names is not None else generic
    if len(class_names) != len(class_sizes):
        raise ValueError("class_names must match class_sizes")
    with open(directory / f"{name}.content", "w", encoding="utf-8") as f:
        for nid, row, lab in zip(node_ids, features, labels):
            f.write(nid + "\t" + "\t".join(map(str, row.tolist())) + "\t" + class_names[lab] + "\n")
    with open(directory / f"{name}.cites", "w", encoding="utf-8") as f:
        for a, b in edges:
            f.write(f"{a}\t{b}\n")
    return directory
