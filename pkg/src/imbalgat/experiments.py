"""Method grid behind ``reproduce``: GCN/GAT x weighted-CE/focal across seeds."""
from __future__ import annotations

import dataclasses

import numpy as np

from . import published
from .config import TrainConfig
from .graphio import GraphDataset, Split, default_minority_classes
from .trainer import train

# method -> (model kind, base loss, regularized)
METHOD_SPECS = {
    "GCN+CE": ("gcn", "weighted_ce", False),
    "GCN+FL": ("gcn", "focal", False),
    "Reg+CE": ("gat", "weighted_ce", True),
    "Reg+FL": ("gat", "focal", True),
}


def method_config(base: TrainConfig, method: str, seed: int) -> TrainConfig:
    kind, loss, reg = METHOD_SPECS[method]
    model = dataclasses.replace(base.model, kind=kind)
    if kind != base.model.kind:
        # architecture defaults (hidden width, dropout) follow the model family
        model = dataclasses.replace(model, hidden=None, dropout=None)
    lam = base.loss.lam if reg else 0.0
    return dataclasses.replace(base, model=model, seed=seed,
                               loss=dataclasses.replace(base.loss, base=loss, lam=lam))


def _stats(values):
    arr = np.array(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def run_grid(ds: GraphDataset, split: Split, base: TrainConfig, seeds, methods=published.METHODS,
             minority_classes=None, progress=None) -> dict:
    """Train every (method, seed) cell; return a JSON-ready summary with no timing fields."""
    if minority_classes is None:
        minority_classes = default_minority_classes(ds)
    order = ds.table_label_order()
    label_of = {cid: f"L{k}" for k, cid in enumerate(order)}
    name = ds.name.lower()
    out = {"dataset": ds.name, "seeds": list(seeds), "split": split.policy_name,
           "minority_classes": [label_of[c] for c in sorted(minority_classes)],
           "label_map": {f"L{k}": ds.class_names[cid] for k, cid in enumerate(order)},
           "methods": {}}
    for method in methods:
        runs = []
        for seed in seeds:
            cfg = method_config(base, method, seed)
            r = train(ds, split, cfg, minority_classes, keep_params=False)
            if progress:
                progress(method, seed, r)
            per_class = {label_of[c]: r.test.per_class_f1[c] for c in range(ds.num_classes)}
            runs.append({
                "seed": seed,
                "config_hash": r.config_hash,
                "selected_epoch": r.selected_epoch,
                "accuracy": r.test.accuracy,
                "auc_roc": r.test.auc_roc,
                "macro_f1": r.test.macro_f1,
                "per_class_f1": per_class,
                "minority_attention": r.minority_attention,
            })
        entry = {"runs": runs, "mean": {}, "std": {}}
        for key in ("accuracy", "auc_roc", "macro_f1"):
            entry["mean"][key], entry["std"][key] = _stats([x[key] for x in runs])
        entry["mean"]["per_class_f1"] = {lab: _stats([x["per_class_f1"][lab] for x in runs])[0]
                                         for lab in label_of.values()}
        entry["mean"]["minority_f1"] = float(np.mean(
            [entry["mean"]["per_class_f1"][label_of[c]] for c in sorted(minority_classes)])) \
            if minority_classes else None
        att = [x["minority_attention"] for x in runs if x["minority_attention"] is not None]
        entry["mean"]["minority_attention"] = float(np.mean(att)) if att else None
        pub = published.TABLE1.get(method, {}).get(name)
        if pub is not None:
            entry["published"] = dict(zip(("accuracy", "auc_roc", "macro_f1"), pub))
            entry["gap"] = {k: entry["mean"][k] - v for k, v in entry["published"].items()}
        per_class_pub = {"cora": published.TABLE4, "citeseer": published.TABLE5}.get(name, {}).get(method)
        if per_class_pub is not None:
            entry["published_per_class_f1"] = per_class_pub
            entry["gap_per_class_f1"] = {lab: entry["mean"]["per_class_f1"][lab] - v
                                         for lab, v in per_class_pub.items()
                                         if lab in entry["mean"]["per_class_f1"]}
        out["methods"][method] = entry
    return out


def format_table(summary: dict, table: str) -> str:
    """Human-readable comparison against the published values."""
    lines = [f"dataset={summary['dataset']} seeds={summary['seeds']} split={summary['split']}"]
    if table == "t1":
        lines.append(f"{'method':<8} {'acc':>7} {'(pub)':>8} {'auc':>7} {'(pub)':>8} {'f1':>7} {'(pub)':>8}")
        for m, e in summary["methods"].items():
            row = f"{m:<8}"
            for k in ("accuracy", "auc_roc", "macro_f1"):
                p = e.get("published", {}).get(k)
                row += f" {e['mean'][k]:7.3f} {'' if p is None else f'{p:.3f}':>8}"
            lines.append(row)
    else:
        labs = summary["minority_classes"]
        lines.append(f"{'method':<8} " + " ".join(f"{lab:>14}" for lab in labs))
        for m, e in summary["methods"].items():
            pp = e.get("published_per_class_f1", {})
            cells = []
            for lab in labs:
                p = pp.get(lab)
                cells.append(f"{e['mean']['per_class_f1'][lab]:.3f} ({'-' if p is None else f'{p:.2f}'})".rjust(14))
            lines.append(f"{m:<8} " + " ".join(cells))
    return "\n".join(lines)
