"""Per-class weighted directed graphs over embeddings.

Two constructions: inverse-distance softmax rows thresholded at ``eta``, and
a top-k nearest-neighbor variant whose row weights are the softmax of the
inverse distances restricted to the k retained neighbors. Row softmax is the
step that makes the graph directed; distances themselves are symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .embedding_io import EmbeddingSet


@dataclass
class GraphConfig:
    mode: str = "threshold"  # "threshold" | "knn"
    eta: float = 0.004
    k: int = 10
    epsilon: float = 1e-12
    normalize: bool = False

    def __post_init__(self):
        if self.mode not in ("threshold", "knn"):
            raise ValueError(f"unknown graph mode {self.mode!r}")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


@dataclass
class ClassGraph:
    """Weighted directed graph over one class's items.

    ``weights[i, j]`` is the edge weight i -> j, 0.0 where no edge; the
    diagonal is always 0 (no self edges). ``node_ids`` maps node ordinals
    back to EmbeddingSet ids.
    """

    class_label: int
    node_ids: np.ndarray  # (n,) int64
    weights: np.ndarray   # (n, n) float64

    def __post_init__(self):
        self.node_ids = np.asarray(self.node_ids, dtype=np.int64)
        self.weights = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))

    @property
    def num_nodes(self) -> int:
        return self.weights.shape[0]

    @property
    def num_edges(self) -> int:
        return int(np.count_nonzero(self.weights))

    def edge_arrays(self):
        """Edges in row-major order as (sources, targets, weights)."""
        src, dst = np.nonzero(self.weights)
        return src, dst, self.weights[src, dst]

    def out_degrees(self) -> np.ndarray:
        return (self.weights > 0).sum(axis=1)

    def validate(self) -> None:
        n = self.num_nodes
        if self.weights.shape != (n, n) or self.node_ids.shape != (n,):
            raise ValueError("inconsistent graph shapes")
        if np.diagonal(self.weights).any():
            raise ValueError("self edges are not allowed")
        w = self.weights[self.weights != 0]
        if w.size and (not np.isfinite(w).all() or (w <= 0).any() or (w > 1).any()):
            raise ValueError("edge weights must be finite and in (0, 1]")
        if (self.weights.sum(axis=1) > 1 + 1e-9).any():
            raise ValueError("outgoing weights per node must not exceed 1")


def _l2_normalize(X):
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return X / norms


def _class_matrix(dataset: EmbeddingSet, class_label: int, normalize: bool):
    ids = dataset.class_members(class_label)
    X = dataset.vectors[ids]
    if normalize:
        X = _l2_normalize(X)
    return ids, np.ascontiguousarray(X)


def _distance_matrix(X):
    return np.sqrt(_kernels.pairwise_sq_dists(X))


def _inverse_distances(X, epsilon):
    dist = _distance_matrix(X)
    with np.errstate(divide="ignore"):
        inv = 1.0 / (dist + epsilon)
    np.fill_diagonal(inv, 0.0)  # sentinel; rows are softmaxed without the diagonal
    return inv


def pairwise_inverse_distances(dataset: EmbeddingSet, class_label: int,
                               epsilon: float = 1e-12) -> np.ndarray:
    """Off-diagonal (i, j) holds 1 / (||v_i - v_j|| + epsilon); diagonal is 0."""
    ids, X = _class_matrix(dataset, class_label, normalize=False)
    if ids.size < 2:
        raise ValueError(f"class {class_label} has fewer than 2 items")
    return _inverse_distances(X, epsilon)


def softmax_row_weights(inv_dist: np.ndarray) -> np.ndarray:
    """Row-wise softmax over off-diagonal entries; each row sums to 1."""
    A = np.array(inv_dist, dtype=np.float64, copy=True)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise ValueError("expected a square matrix")
    if n < 2:
        raise ValueError("matrix must be at least 2x2")
    off_diag = ~np.eye(n, dtype=bool)
    if not np.isfinite(A[off_diag]).all():
        raise ValueError("off-diagonal entries must be finite")
    np.fill_diagonal(A, -np.inf)
    A -= A.max(axis=1, keepdims=True)
    np.exp(A, out=A)  # exp(-inf) = 0 keeps the diagonal out of the sums
    A /= A.sum(axis=1, keepdims=True)
    return A


def threshold_graph(weights: np.ndarray, class_label: int, node_ids,
                    eta: float) -> ClassGraph:
    """Keep exactly the off-diagonal entries with weight >= eta."""
    if eta < 0:
        raise ValueError("eta must be >= 0")
    W = np.where(weights >= eta, weights, 0.0)
    np.fill_diagonal(W, 0.0)
    return ClassGraph(class_label, node_ids, W)


def knn_graph(dataset: EmbeddingSet, class_label: int, k: int,
              epsilon: float = 1e-12) -> ClassGraph:
    """Each node points at its k nearest neighbors (ties to smaller ordinal);
    row weights are the softmax of the inverse distances to those neighbors."""
    ids, X = _class_matrix(dataset, class_label, normalize=False)
    return _knn_from_matrix(X, ids, class_label, k, epsilon)


def _knn_from_matrix(X, ids, class_label, k, epsilon):
    n = X.shape[0]
    if k >= n:
        raise ValueError(f"k={k} must be smaller than class size {n}")
    if k < 1:
        raise ValueError("k must be >= 1")
    dist = _distance_matrix(X)
    np.fill_diagonal(dist, np.inf)
    # stable sort keeps ties in ordinal order
    neighbors = np.argsort(dist, axis=1, kind="stable")[:, :k]
    rows = np.arange(n)[:, None]
    inv = 1.0 / (dist[rows, neighbors] + epsilon)
    inv -= inv.max(axis=1, keepdims=True)
    np.exp(inv, out=inv)
    inv /= inv.sum(axis=1, keepdims=True)
    W = np.zeros((n, n))
    W[rows, neighbors] = inv
    return ClassGraph(class_label, ids, W)


def build_class_graph(dataset: EmbeddingSet, class_label: int,
                      config: GraphConfig) -> ClassGraph:
    ids, X = _class_matrix(dataset, class_label, config.normalize)
    if ids.size < 2:
        raise ValueError(f"class {class_label} has fewer than 2 items")
    if config.mode == "threshold":
        inv = _inverse_distances(X, config.epsilon)
        return threshold_graph(softmax_row_weights(inv), class_label, ids, config.eta)
    return _knn_from_matrix(X, ids, class_label, config.k, config.epsilon)


def dump_graph(graph: ClassGraph, path) -> None:
    """Debug dump: header ``class n_nodes n_edges`` then ``src dst weight``
    lines with 17 significant digits, row-major edge order."""
    src, dst, w = graph.edge_arrays()
    lines = [f"{graph.class_label} {graph.num_nodes} {src.size}"]
    lines.extend(f"{s} {d} {x:.17g}" for s, d, x in zip(src, dst, w))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
