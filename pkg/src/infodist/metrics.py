"""Accuracy, macro F1, and macro one-vs-rest AUC.

AUC per class is the probability that a random positive outranks a random
negative under the class score, ties counting one half. It is evaluated
through average ranks, which equals exhaustive pairwise concordance counting
exactly; the test suite carries the pairwise oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass
class EvalReport:
    accuracy: float
    macro_f1: float
    macro_auc: float
    per_class_f1: np.ndarray
    per_class_auc: np.ndarray  # nan where the class has no positives or no negatives
    n_items: int

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "macro_auc": self.macro_auc,
            "per_class_f1": [float(v) for v in self.per_class_f1],
            "per_class_auc": [None if np.isnan(v) else float(v) for v in self.per_class_auc],
            "n_items": self.n_items,
        }

    def to_text(self) -> str:
        lines = [
            f"n_items = {self.n_items}",
            f"accuracy = {self.accuracy:.6f}",
            f"macro_f1 = {self.macro_f1:.6f}",
            f"macro_auc = {self.macro_auc:.6f}",
        ]
        for c, v in enumerate(self.per_class_f1):
            lines.append(f"class_{c}.f1 = {v:.6f}")
        for c, v in enumerate(self.per_class_auc):
            lines.append(f"class_{c}.auc = " + ("undefined" if np.isnan(v) else f"{v:.6f}"))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2)


def accuracy(predictions, truth) -> float:
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if predictions.shape != truth.shape:
        raise ValueError("length mismatch")
    if predictions.size == 0:
        raise ValueError("empty input")
    return float((predictions == truth).mean())


def per_class_f1(predictions, truth, num_classes: int) -> np.ndarray:
    """F1 per class with the 0-when-undefined convention."""
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if predictions.shape != truth.shape:
        raise ValueError("length mismatch")
    if predictions.size == 0:
        raise ValueError("empty input")
    scores = np.zeros(num_classes)
    for c in range(num_classes):
        tp = int(((predictions == c) & (truth == c)).sum())
        fp = int(((predictions == c) & (truth != c)).sum())
        fn = int(((predictions != c) & (truth == c)).sum())
        denom = 2 * tp + fp + fn
        scores[c] = 2.0 * tp / denom if denom else 0.0
    return scores


def f1_score(predictions, truth, num_classes: int, average: str = "macro") -> float:
    """F1 under the chosen averaging: macro (unweighted mean over classes),
    weighted (support-weighted mean), or micro (global counts)."""
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if average == "macro":
        return float(per_class_f1(predictions, truth, num_classes).mean())
    if average == "weighted":
        per = per_class_f1(predictions, truth, num_classes)
        support = np.bincount(truth, minlength=num_classes)
        if support.sum() == 0:
            raise ValueError("empty input")
        return float((per * support).sum() / support.sum())
    if average == "micro":
        tp = int((predictions == truth).sum())
        fp = fn = int((predictions != truth).sum())
        denom = 2 * tp + fp + fn
        return 2.0 * tp / denom if denom else 0.0
    raise ValueError(f"unknown average {average!r}")


def macro_f1(predictions, truth, num_classes: int) -> float:
    """Unweighted mean of per-class F1 over all classes."""
    return f1_score(predictions, truth, num_classes, average="macro")


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the group mean rank."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i + 1
        while j < values.size and sorted_vals[j] == sorted_vals[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + 1 + j)
        i = j
    return ranks


def binary_auc(scores, positives) -> float:
    """P(score of random positive > score of random negative), ties at 0.5."""
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = positives.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need both positives and negatives")
    ranks = _average_ranks(scores)
    return float((ranks[positives].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def per_class_ovr_auc(probabilities, truth, num_classes: int) -> np.ndarray:
    probabilities = np.asarray(probabilities, dtype=np.float64)
    truth = np.asarray(truth)
    out = np.full(num_classes, np.nan)
    for c in range(num_classes):
        positives = truth == c
        n_pos = int(positives.sum())
        if n_pos == 0 or n_pos == truth.size:
            continue
        out[c] = binary_auc(probabilities[:, c], positives)
    return out


def ovr_auc_score(probabilities, truth, num_classes: int, average: str = "macro") -> float:
    """One-vs-rest AUC under macro, weighted (support over defined classes),
    or micro (all item/class decisions pooled into one binary problem)
    averaging."""
    probabilities = np.asarray(probabilities, dtype=np.float64)
    truth = np.asarray(truth)
    if average == "micro":
        onehot = np.zeros_like(probabilities, dtype=bool)
        onehot[np.arange(truth.size), truth] = True
        return binary_auc(probabilities.ravel(), onehot.ravel())
    values = per_class_ovr_auc(probabilities, truth, num_classes)
    defined = ~np.isnan(values)
    if not defined.any():
        raise ValueError("no class has both positives and negatives")
    if average == "macro":
        return float(values[defined].mean())
    if average == "weighted":
        support = np.bincount(truth, minlength=num_classes).astype(np.float64)
        support[~defined] = 0.0
        return float((values[defined] * support[defined]).sum() / support.sum())
    raise ValueError(f"unknown average {average!r}")


def macro_ovr_auc(probabilities, truth, num_classes: int) -> float:
    """Mean AUC over classes that have both positives and negatives."""
    return ovr_auc_score(probabilities, truth, num_classes, average="macro")


def evaluate_probabilities(probabilities, truth, num_classes: int) -> EvalReport:
    """Full report from class probabilities; argmax ties break to the
    smaller class index."""
    probabilities = np.asarray(probabilities, dtype=np.float64)
    truth = np.asarray(truth)
    predictions = np.argmax(probabilities, axis=1)
    f1 = per_class_f1(predictions, truth, num_classes)
    auc = per_class_ovr_auc(probabilities, truth, num_classes)
    defined = ~np.isnan(auc)
    if not defined.any():
        raise ValueError("no class has both positives and negatives")
    return EvalReport(
        accuracy=accuracy(predictions, truth),
        macro_f1=float(f1.mean()),
        macro_auc=float(auc[defined].mean()),
        per_class_f1=f1,
        per_class_auc=auc,
        n_items=int(truth.size),
    )
