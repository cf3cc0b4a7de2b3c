"""Central finite-difference checks of tape gradients on random small graphs and models."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import losses
from . import numcore as nc
from .graphio import GraphDataset, Split, build_graph, minority_mask
from .losses import LossConfig
from .models import Architecture, init_params, model_forward


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def numeric_grad(f, tensors, h: float = 1e-5) -> list[np.ndarray]:
    """Central differences of scalar ``f()`` with respect to each tensor's entries."""
    out = []
    for t in tensors:
        g = np.zeros(t.shape)
        for idx in np.ndindex(*t.shape):
            orig = t.data[idx]
            t.data[idx] = orig + h
            up = f()
            t.data[idx] = orig - h
            down = f()
            t.data[idx] = orig
            g[idx] = (up - down) / (2 * h)
        out.append(g)
    return out


def random_graph(rng: np.random.Generator, num_nodes: int, num_features: int, num_classes: int,
                 edge_prob: float = 0.4) -> GraphDataset:
    feats = rng.random((num_nodes, num_features)) + 0.05
    labels = np.arange(num_nodes) % num_classes
    rng.shuffle(labels)
    edges = [(u, v) for u in range(num_nodes) for v in range(u + 1, num_nodes) if rng.random() < edge_prob]
    return build_graph(feats, labels, edges, name="random", class_names=[f"c{i}" for i in range(num_classes)])


@dataclass
class GradcheckCase:
    index: int
    kind: str
    base: str
    num_nodes: int
    num_params: int
    max_rel_error: float


def check_instance(rng: np.random.Generator, index: int = 0, kind: str | None = None,
                   max_nodes: int = 8, bug: bool = False) -> GradcheckCase:
    """Compare backward against finite differences for one random (graph, model, loss).

    ``bug=True`` perturbs the analytic gradient; it exists as a negative control.
    """
    n = int(rng.integers(3, max_nodes + 1))
    k = int(rng.integers(2, 4))
    m = int(rng.integers(2, 6))
    ds = random_graph(rng, n, m, k)
    kind = kind or ("gat" if index % 3 else "gcn")
    arch = Architecture(kind, m, k, hidden=int(rng.integers(2, 5)), heads=int(rng.integers(1, 3)), dropout=0.0)
    params = init_params(arch, int(rng.integers(0, 2**31)))
    tensors = params.tensors()
    base = "focal" if index % 2 else "weighted_ce"
    lc = LossConfig(base=base, gamma=float(rng.uniform(0.2, 2.0)), lam=0.5,
                    reg_reduction="mean" if index % 4 == 1 else "sum")
    train_idx = np.sort(rng.choice(n, size=max(2, n // 2), replace=False))
    split = Split(train_idx, np.zeros(0, np.int64), np.zeros(0, np.int64), "gradcheck")
    mask = minority_mask(ds, split, [0])
    weights = losses.class_weights(np.maximum(ds.class_counts(), 1))

    def objective():
        probs, att = model_forward(ds, params, training=False)
        base_l = losses.base_loss(probs, ds.labels, split.train_idx, lc, weights)
        reg = losses.kl_attention_reg(att, mask, lc) if kind == "gat" else nc.Tensor(0.0)
        return losses.total_loss(base_l, reg, lc.lam)

    with nc.Tape() as tape:
        loss = objective()
    analytic = nc.grad_of(tape, loss, tensors)
    if bug:
        analytic = [g * 1.01 + 1e-3 for g in analytic]
    numeric = numeric_grad(lambda: objective().item(), tensors)
    err = max(rel_error(a, b) for a, b in zip(analytic, numeric))
    return GradcheckCase(index, kind, base, n, params.num_parameters(), err)


def run(seed: int = 0, count: int = 20, max_nodes: int = 8, bug: bool = False) -> list[GradcheckCase]:
    rng = np.random.default_rng(seed)
    return [check_instance(rng, i, max_nodes=max_nodes, bug=bug) for i in range(count)]
