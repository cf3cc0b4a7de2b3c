"""Full-batch training with Adam, validation-based checkpoint selection, and the lambda sweep."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import losses
from . import numcore as nc
from .config import TrainConfig, config_hash
from .graphio import GraphDataset, MinorityMask, Split, default_minority_classes, minority_mask
from .losses import LossConfig
from .metrics import MetricsReport, evaluate_probs
from .models import Architecture, ModelParams, init_params, model_forward

log = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = (0.01, 0.05, 0.1, 0.3, 0.5, 1.0)


class TrainingAborted(RuntimeError):
    """Loss went non-finite; carries the epoch and the config that produced it."""

    def __init__(self, epoch: int, config: TrainConfig, cause: Exception):
        self.epoch = epoch
        self.config = config
        dump = json.dumps(train_config_dict(config), sort_keys=True)
        super().__init__(f"non-finite loss at epoch {epoch}: {cause}; config={dump}")


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p.data) for p in params], [np.zeros_like(p.data) for p in params])


def adam_step(params, grads, state: AdamState, lr: float, weight_decay: float = 0.0,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    """In-place Adam update with L2 weight decay folded into the gradient."""
    if not (len(params) == len(grads) == len(state.m)):
        raise ValueError("params, grads and optimizer state differ in length")
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.data.shape or m.shape != p.data.shape:
            raise ValueError(f"shape mismatch: param {p.data.shape}, grad {g.shape}")
        g = g + weight_decay * p.data
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data = p.data - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return state


def architecture_for(ds: GraphDataset, config: TrainConfig) -> Architecture:
    mc = config.model.resolved()
    return Architecture(kind=mc.kind, in_dim=ds.num_features, num_classes=ds.num_classes,
                        hidden=mc.hidden, heads=mc.heads, dropout=mc.dropout, alpha=mc.alpha)


def train_config_dict(config: TrainConfig) -> dict:
    d = dataclasses.asdict(config)
    d["loss"]["lambda"] = d["loss"].pop("lam")
    return d


def loss_weights(ds: GraphDataset, split: Split, lc: LossConfig) -> np.ndarray:
    if lc.weight_source == "uniform":
        return np.ones(ds.num_classes)
    if lc.weight_source == "train_split":
        return losses.class_weights(ds.class_counts(split.train_idx))
    return losses.class_weights(ds.class_counts())


def masked_attention_mean(att, mask: MinorityMask, key=(0, 0)) -> float | None:
    if mask.empty or key not in att:
        return None
    return float(att[key].values()[mask.edge_slots].mean())


@dataclass
class TrainReport:
    epochs: list[dict]
    selected_epoch: int
    val: MetricsReport
    test: MetricsReport
    seed: int
    config_hash: str
    config: dict
    minority_classes: list[int]
    minority_attention: float | None  # mean masked attention of the regularized head, eval mode
    wall_time_s: float
    params: ModelParams | None = field(default=None, repr=False)

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "config": self.config,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "selected_epoch": self.selected_epoch,
            "epochs_run": len(self.epochs),
            "minority_classes": self.minority_classes,
            "minority_attention": self.minority_attention,
            "val": self.val.to_dict(),
            "test": self.test.to_dict(),
            "epochs": self.epochs,
        }
        if timing:
            d["wall_time_s"] = self.wall_time_s
        return d

    def write_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["epoch", "train_loss", "base", "reg", "val_acc", "val_f1"])
            for e in self.epochs:
                w.writerow([e["epoch"], repr(e["train_loss"]), repr(e["base_loss"]), repr(e["reg_value"]),
                            repr(e["val_acc"]), repr(e["val_f1"])])


def evaluate(ds: GraphDataset, nodes, params: ModelParams) -> MetricsReport:
    nodes = np.asarray(nodes, dtype=np.int64)
    if nodes.size == 0:
        raise ValueError("evaluate: empty node set")
    probs, _ = model_forward(ds, params, training=False)
    return evaluate_probs(probs.data, ds.labels, nodes, ds.num_classes)


def train(ds: GraphDataset, split: Split, config: TrainConfig, minority_classes=None,
          keep_params: bool = True) -> TrainReport:
    start = time.perf_counter()
    arch = architecture_for(ds, config)
    lc = config.loss
    lam = lc.lam
    if arch.kind == "gcn" and lam > 0:
        log.info("gcn has no attention; lambda forced to 0")
        lam = 0.0
    if minority_classes is None:
        minority_classes = default_minority_classes(ds)
    mask = minority_mask(ds, split, minority_classes)
    weights = loss_weights(ds, split, lc)
    params = init_params(arch, config.seed)
    tensors = params.tensors()
    state = AdamState.zeros_like(tensors)
    rng = np.random.default_rng([config.seed, 1])
    X = ds.X

    history = []
    best = None
    best_params = params.copy()
    since_best = 0
    for epoch in range(1, config.epochs + 1):
        try:
            with nc.Tape() as tape:
                probs, att = model_forward(ds, params, training=True, rng=rng, features=X)
                base = losses.base_loss(probs, ds.labels, split.train_idx, lc, weights)
                if arch.kind == "gat" and lam > 0:
                    reg = losses.kl_attention_reg(att, mask, lc)
                else:
                    reg = nc.Tensor(0.0)
                total = losses.total_loss(base, reg, lam)
            grads = nc.grad_of(tape, total, tensors)
        except nc.NumericalError as e:
            raise TrainingAborted(epoch, config, e) from e
        adam_step(tensors, grads, state, config.lr, config.weight_decay)

        val_probs, _ = model_forward(ds, params, training=False, features=X)
        vm = evaluate_probs(val_probs.data, ds.labels, split.val_idx, ds.num_classes)
        with np.errstate(all="ignore"):
            val_loss = losses.base_loss(val_probs, ds.labels, split.val_idx, lc, weights).item()
        history.append({
            "epoch": epoch,
            "train_loss": total.item(),
            "base_loss": base.item(),
            "reg_value": reg.item(),
            "val_loss": val_loss,
            "val_acc": vm.accuracy,
            "val_f1": vm.macro_f1,
        })

        if config.select_by == "val_macro_f1":
            score = vm.macro_f1
        elif config.select_by == "val_loss":
            score = -val_loss
        else:
            score = float(epoch)
        if best is None or score > best[0]:
            best = (score, epoch)
            best_params = params.copy()
            since_best = 0
        else:
            since_best += 1
            if config.patience is not None and since_best >= config.patience:
                log.info("early stop at epoch %d (best %d)", epoch, best[1])
                break

    probs, att = model_forward(ds, best_params, training=False, features=X)
    key = (lc.reg_layer, lc.reg_head)
    return TrainReport(
        epochs=history,
        selected_epoch=best[1],
        val=evaluate_probs(probs.data, ds.labels, split.val_idx, ds.num_classes),
        test=evaluate_probs(probs.data, ds.labels, split.test_idx, ds.num_classes),
        seed=config.seed,
        config_hash=config_hash(train_config_dict(config)),
        config=train_config_dict(config),
        minority_classes=sorted(int(c) for c in minority_classes),
        minority_attention=masked_attention_mean(att, mask, key),
        wall_time_s=time.perf_counter() - start,
        params=best_params if keep_params else None,
    )


@dataclass
class SweepResult:
    best_lambda: float
    reports: dict[float, TrainReport]

    def to_dict(self) -> dict:
        return {
            "best_lambda": self.best_lambda,
            "runs": [
                {"lambda": lam, "val_macro_f1": r.val.macro_f1, "test": r.test.to_dict(),
                 "selected_epoch": r.selected_epoch}
                for lam, r in self.reports.items()
            ],
        }


def sweep(ds: GraphDataset, split: Split, base_config: TrainConfig, grid=DEFAULT_LAMBDA_GRID,
          minority_classes=None) -> SweepResult:
    """Train once per lambda and keep the best validation macro-F1; ties go to the smaller lambda."""
    grid = sorted(set(float(g) for g in grid))
    if not grid:
        raise ValueError("empty lambda grid")
    if grid[0] < 0 or grid[-1] > 1:
        raise ValueError("lambda grid must lie in [0, 1]")
    reports = {}
    best = None
    for lam in grid:
        r = train(ds, split, base_config.replace(lam=lam), minority_classes, keep_params=False)
        reports[lam] = r
        log.info("lambda=%g val_f1=%.4f", lam, r.val.macro_f1)
        if best is None or r.val.macro_f1 > reports[best].val.macro_f1:
            best = lam
    return SweepResult(best, reports)
