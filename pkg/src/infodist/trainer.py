"""Linear softmax classifier trained with cross entropy plus a per-class
boundary-contrastive penalty.

Per batch and class c, positives are items labeled c. Their class-c
probabilities are sorted descending and the probability at 1-indexed rank
ceil(B * rho) becomes the positive boundary; the negative boundary sits tau
below it. Positives falling under the positive boundary and negatives rising
above the negative region are penalized linearly. Boundaries are constants
with respect to gradients (nothing flows through the sort), which keeps the
penalty piecewise linear in the probabilities with subgradient 0 at kinks.

The printed form of the negative hinge is max(p - b_n + tau, 0), i.e. the
margin tau enters twice (b_n is already b_p - tau). ``negative_hinge``
selects between that form ("as_printed", default) and the plain
max(p - b_n, 0) variant ("against_bn").
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding_io import EmbeddingSet

MODEL_MAGIC = b"IDSTMODL"
_MODEL_HEADER = struct.Struct("<8sHII")

NEGATIVE_HINGE_MODES = ("as_printed", "against_bn")


@dataclass
class LossConfig:
    rho: float = 0.75
    tau: float = 0.1
    learning_rate: float = 0.1
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    negative_hinge: str = "as_printed"

    def __post_init__(self):
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("rho must be in (0, 1]")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.negative_hinge not in NEGATIVE_HINGE_MODES:
            raise ValueError(f"unknown negative_hinge mode {self.negative_hinge!r}")


@dataclass
class Classifier:
    weights: np.ndarray  # (C, d)
    bias: np.ndarray     # (C,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def logits(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights.T + self.bias

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return softmax_probabilities(self.logits(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(X), axis=1)


def softmax_probabilities(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction; rows sum to 1."""
    z = logits - logits.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def class_boundaries(probs_column: np.ndarray, labels: np.ndarray, class_label: int,
                     rho: float, tau: float):
    """(positive boundary, negative boundary) for one class, or None when the
    batch holds no positives for it."""
    positives = probs_column[labels == class_label]
    count = positives.shape[0]
    if count == 0:
        return None
    # 1e-9 guards float noise in count*rho at exact integer boundaries
    rank = min(max(int(math.ceil(count * rho - 1e-9)), 1), count)
    ordered = np.sort(positives)[::-1]
    b_pos = float(ordered[rank - 1])
    return b_pos, b_pos - tau


def compute_batch_boundaries(probs: np.ndarray, labels: np.ndarray, num_classes: int,
                             rho: float, tau: float):
    """Per-class boundaries for one batch; None entries mark absent classes."""
    return [class_boundaries(probs[:, c], labels, c, rho, tau)
            for c in range(num_classes)]


def contrastive_class_loss(probs_column: np.ndarray, labels: np.ndarray, class_label: int,
                           b_pos: float, b_neg: float, tau: float,
                           negative_hinge: str = "as_printed") -> float:
    """Sum of the positive-shortfall and negative-overshoot hinge terms."""
    pos_mask = labels == class_label
    pos = probs_column[pos_mask]
    neg = probs_column[~pos_mask]
    loss = np.abs(np.minimum(pos - b_pos, 0.0)).sum()
    shift = tau if negative_hinge == "as_printed" else 0.0
    loss += np.maximum(neg - b_neg + shift, 0.0).sum()
    return float(loss)


def total_loss(logits: np.ndarray, labels: np.ndarray, num_classes: int,
               config: LossConfig, boundaries=None):
    """Mean cross entropy plus the summed per-class boundary penalty.

    Returns (loss, gradient with respect to logits). ``boundaries`` may be
    supplied to reuse (or freeze) previously computed boundaries.
    """
    batch = logits.shape[0]
    if batch == 0:
        raise ValueError("batch must be nonempty")
    probs = softmax_probabilities(logits)
    onehot = np.zeros_like(probs)
    onehot[np.arange(batch), labels] = 1.0

    ce = float(-np.log(np.maximum(probs[np.arange(batch), labels], 1e-300)).mean())
    grad = (probs - onehot) / batch

    if boundaries is None:
        boundaries = compute_batch_boundaries(probs, labels, num_classes,
                                              config.rho, config.tau)

    penalty = 0.0
    dpenalty = np.zeros_like(probs)  # d(penalty)/d(probs)
    shift = config.tau if config.negative_hinge == "as_printed" else 0.0
    for c in range(num_classes):
        if boundaries[c] is None:
            continue
        b_pos, b_neg = boundaries[c]
        column = probs[:, c]
        pos_mask = labels == c
        pos_short = pos_mask & (column < b_pos)
        neg_over = (~pos_mask) & (column - b_neg + shift > 0.0)
        penalty += (b_pos - column[pos_short]).sum()
        penalty += (column[neg_over] - b_neg + shift).sum()
        dpenalty[pos_short, c] -= 1.0
        dpenalty[neg_over, c] += 1.0

    # chain d/dprobs through the softmax: dz = p * (g - <g, p>)
    inner = (dpenalty * probs).sum(axis=1, keepdims=True)
    grad += probs * (dpenalty - inner)
    return ce + float(penalty), grad


def _selected_ids(selection) -> np.ndarray:
    if hasattr(selection, "all_ids"):
        return selection.all_ids()
    return np.asarray(selection, dtype=np.int64)


def train(dataset: EmbeddingSet, selection, config: LossConfig) -> Classifier:
    """Mini-batch SGD over the selected items only; zero-initialized,
    deterministic in the config seed."""
    ids = _selected_ids(selection)
    if ids.size == 0:
        raise ValueError("selection is empty")
    X = dataset.vectors[ids]
    y = dataset.labels[ids]
    C = dataset.num_classes

    weights = np.zeros((C, dataset.dim))
    bias = np.zeros(C)
    rng = np.random.default_rng(config.seed)
    lr = config.learning_rate

    for epoch in range(config.epochs):
        order = rng.permutation(ids.size)
        for start in range(0, ids.size, config.batch_size):
            batch = order[start:start + config.batch_size]
            Xb, yb = X[batch], y[batch]
            logits = Xb @ weights.T + bias
            loss, grad_logits = total_loss(logits, yb, C, config)
            if not math.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch} batch {start // config.batch_size}")
            weights -= lr * (grad_logits.T @ Xb)
            bias -= lr * grad_logits.sum(axis=0)
    return Classifier(weights, bias)


def save_classifier(model: Classifier, path) -> None:
    """Checkpoint: magic, u16 version, u32 C, u32 d, f64 row-major weights,
    then f64 biases, little-endian."""
    header = _MODEL_HEADER.pack(MODEL_MAGIC, 1, model.num_classes, model.dim)
    body = model.weights.astype("<f8").tobytes() + model.bias.astype("<f8").tobytes()
    Path(path).write_bytes(header + body)


def load_classifier(path) -> Classifier:
    data = Path(path).read_bytes()
    if len(data) < _MODEL_HEADER.size:
        raise ValueError("checkpoint shorter than header")
    magic, version, C, d = _MODEL_HEADER.unpack_from(data)
    if magic != MODEL_MAGIC or version != 1:
        raise ValueError("bad checkpoint header")
    expected = _MODEL_HEADER.size + 8 * (C * d + C)
    if len(data) != expected:
        raise ValueError("checkpoint size does not match header")
    weights = np.frombuffer(data, dtype="<f8", count=C * d,
                            offset=_MODEL_HEADER.size).reshape(C, d)
    bias = np.frombuffer(data, dtype="<f8", count=C,
                         offset=_MODEL_HEADER.size + 8 * C * d)
    return Classifier(weights.copy(), bias.copy())
