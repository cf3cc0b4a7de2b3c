"""Accuracy, macro-F1 and macro one-vs-rest AUC-ROC over a node subset."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass
class MetricsReport:
    accuracy: float
    macro_f1: float
    auc_roc: float | None  # None when no class has both positives and negatives
    per_class_f1: list[float]
    confusion: list[list[int]]
    auc_classes: list[int]  # classes that entered the AUC average

    def to_dict(self) -> dict:
        return asdict(self)


def _subset(values, mask):
    values = np.asarray(values)
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("metric over an empty node set")
    return values[mask]


def accuracy(pred, true, mask) -> float:
    p, t = _subset(pred, mask), _subset(true, mask)
    return float(np.mean(p == t))


def confusion_matrix(pred, true, mask, n_classes: int) -> np.ndarray:
    """Rows are true classes, columns predicted."""
    p, t = _subset(pred, mask), _subset(true, mask)
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


def f1_scores(pred, true, mask, n_classes: int) -> tuple[np.ndarray, float]:
    """Per-class F1 (0 where undefined) and its unweighted mean over all classes."""
    cm = confusion_matrix(pred, true, mask, n_classes)
    tp = np.diag(cm).astype(np.float64)
    denom = cm.sum(axis=0) + cm.sum(axis=1)  # predicted + actual = 2tp + fp + fn
    f1 = np.divide(2 * tp, denom, out=np.zeros(n_classes), where=denom > 0)
    return f1, float(f1.mean())


def binary_auc(scores, positive) -> float:
    """Mann-Whitney AUC with midranks for ties."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    ranks = rankdata(scores, method="average")
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def auc_roc_macro(probs, true, mask, n_classes: int) -> tuple[float, list[int]]:
    """Mean one-vs-rest AUC over classes with both positives and negatives in the mask."""
    P = _subset(probs, mask)
    t = _subset(true, mask)
    aucs, used = [], []
    for c in range(n_classes):
        pos = t == c
        if pos.all() or not pos.any():
            continue
        aucs.append(binary_auc(P[:, c], pos))
        used.append(c)
    if not aucs:
        raise ValueError("no class has both positive and negative nodes in the mask")
    return float(np.mean(aucs)), used


def evaluate_probs(probs, true, mask, n_classes: int) -> MetricsReport:
    probs = np.asarray(probs)
    pred = probs.argmax(axis=1)
    f1, macro = f1_scores(pred, true, mask, n_classes)
    try:
        auc, used = auc_roc_macro(probs, true, mask, n_classes)
    except ValueError:
        auc, used = None, []
    return MetricsReport(
        accuracy=accuracy(pred, true, mask),
        macro_f1=macro,
        auc_roc=auc,
        per_class_f1=f1.tolist(),
        confusion=confusion_matrix(pred, true, mask, n_classes).tolist(),
        auc_classes=used,
    )
