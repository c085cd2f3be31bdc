"""Embedding pool type, binary/CSV interchange, and seeded synthetic fixtures.

Binary layout (little-endian): magic ``IDST``, u16 version (1), u16 reserved,
u32 item count, u32 dim, u32 num_classes, then per item a u32 label followed
by ``dim`` f32 values. Item id is the 0-based record index. Vectors are
stored as f32; all in-memory computation uses f64.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"IDST"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHIII")
_MAX_MEAN_ATTEMPTS = 10_000


class FormatError(ValueError):
    """An interchange file violates the format contract."""


@dataclass
class EmbeddingSet:
    """Labeled pool of fixed-dimension vectors; item id equals row index."""

    vectors: np.ndarray  # (n, dim) float64
    labels: np.ndarray   # (n,) int64
    num_classes: int

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.num_classes = int(self.num_classes)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def class_members(self, label: int) -> np.ndarray:
        """Item ids carrying the given label, in ascending order."""
        return np.flatnonzero(self.labels == label)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def subset(self, ids) -> "EmbeddingSet":
        """New set holding the given items, reindexed to 0..len-1."""
        ids = np.asarray(ids, dtype=np.int64)
        return EmbeddingSet(self.vectors[ids].copy(), self.labels[ids].copy(), self.num_classes)

    def validate(self, require_all_classes: bool = False) -> None:
        if self.vectors.ndim != 2 or self.vectors.shape[1] < 1:
            raise ValueError("vectors must be a (n, dim) matrix with dim >= 1")
        if self.labels.shape != (len(self),):
            raise ValueError("labels length does not match vector count")
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        if not np.isfinite(self.vectors).all():
            bad = int(np.flatnonzero(~np.isfinite(self.vectors).all(axis=1))[0])
            raise ValueError(f"non-finite value at record {bad}")
        if len(self) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            bad = int(np.flatnonzero((self.labels < 0) | (self.labels >= self.num_classes))[0])
            raise ValueError(f"label {int(self.labels[bad])} out of range at record {bad}")
        if require_all_classes:
            counts = self.class_counts()
            if (counts == 0).any():
                missing = int(np.flatnonzero(counts == 0)[0])
                raise ValueError(f"class {missing} has no items")


def read_embeddings(path) -> EmbeddingSet:
    """Parse the binary interchange format, reporting errors with record index."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError("malformed header: file shorter than header")
    magic, version, _reserved, count, dim, num_classes = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError("malformed header: bad magic")
    if version != FORMAT_VERSION:
        raise FormatError(f"malformed header: unsupported version {version}")
    if dim < 1 or num_classes < 1:
        raise FormatError("malformed header: dim and num_classes must be positive")

    record_size = 4 + 4 * dim
    body = len(data) - _HEADER.size
    expected = count * record_size
    if body > expected:
        raise FormatError(f"trailing bytes after record {count - 1}" if count else "trailing bytes after header")
    if body < expected:
        index = body // record_size
        if body - index * record_size >= 4:
            raise FormatError(f"dimension mismatch at record {index}")
        raise FormatError(f"truncated file at record {index}")

    rec_dtype = np.dtype([("label", "<u4"), ("vec", "<f4", (dim,))])
    records = np.frombuffer(data, dtype=rec_dtype, count=count, offset=_HEADER.size)
    labels = records["label"].astype(np.int64)
    vectors = records["vec"].astype(np.float64).reshape(count, dim)

    bad_label = np.flatnonzero(labels >= num_classes)
    if bad_label.size:
        i = int(bad_label[0])
        raise FormatError(f"label {int(labels[i])} out of range at record {i}")
    finite = np.isfinite(vectors).all(axis=1)
    if not finite.all():
        raise FormatError(f"non-finite value at record {int(np.flatnonzero(~finite)[0])}")
    return EmbeddingSet(vectors, labels, int(num_classes))


def write_embeddings(dataset: EmbeddingSet, path) -> None:
    """Emit the binary interchange format; validates before writing any bytes."""
    dataset.validate()
    vectors32 = dataset.vectors.astype("<f4")
    if not np.isfinite(vectors32).all():
        raise ValueError("vector value exceeds 32-bit float range")
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, 0, len(dataset), dataset.dim, dataset.num_classes)
    rec_dtype = np.dtype([("label", "<u4"), ("vec", "<f4", (dataset.dim,))])
    records = np.empty(len(dataset), dtype=rec_dtype)
    records["label"] = dataset.labels.astype("<u4")
    records["vec"] = vectors32
    Path(path).write_bytes(header + records.tobytes())


def read_csv_embeddings(path, num_classes: int | None = None) -> EmbeddingSet:
    """Import the CSV format: header ``label,f0,...,f{d-1}``, one row per item."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        if len(cols) < 2 or cols[0] != "label" or cols[1:] != [f"f{i}" for i in range(len(cols) - 1)]:
            raise FormatError("malformed header: expected label,f0,...,f{d-1}")
        dim = len(cols) - 1
        labels: list[int] = []
        rows: list[list[float]] = []
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != dim + 1:
                raise FormatError(f"dimension mismatch at record {i}")
            try:
                label = int(parts[0])
                values = [float(v) for v in parts[1:]]
            except ValueError as exc:
                raise FormatError(f"unparseable value at record {i}: {exc}") from None
            if not all(math.isfinite(v) for v in values):
                raise FormatError(f"non-finite value at record {i}")
            labels.append(label)
            rows.append(values)

    inferred = (max(labels) + 1) if labels else 1
    classes = int(num_classes) if num_classes is not None else inferred
    vectors = np.asarray(rows, dtype=np.float64).reshape(len(rows), dim)
    dataset = EmbeddingSet(vectors, np.asarray(labels, dtype=np.int64), classes)
    dataset.validate()
    return dataset


@dataclass
class FixtureSpec:
    """Deterministic recipe for a synthetic pool of Gaussian clusters."""

    seed: int
    num_classes: int
    clusters_per_class: int
    dim: int
    count_per_class: int
    separation: float
    noise_sigma: float


def _check_fixture(spec: FixtureSpec) -> None:
    if spec.num_classes < 1 or spec.clusters_per_class < 1:
        raise ValueError("num_classes and clusters_per_class must be positive")
    if spec.dim < 1 or spec.count_per_class < 1:
        raise ValueError("dim and count_per_class must be positive")
    if spec.separation <= 0 or spec.noise_sigma <= 0:
        raise ValueError("separation and noise_sigma must be positive")


def _draw_cluster_means(rng, total, dim, min_sep):
    # Typical pairwise distance is kept near the separation floor so that
    # `separation` actually controls cluster overlap; scale grows if
    # rejection stalls (tight packing in low dim).
    scale = 1.3 * min_sep / math.sqrt(2.0 * dim)
    means = np.empty((total, dim))
    accepted = 0
    attempts = 0
    while accepted < total:
        if attempts >= _MAX_MEAN_ATTEMPTS:
            raise ValueError("could not place cluster means at the required separation")
        candidate = rng.normal(0.0, scale, size=dim)
        attempts += 1
        if accepted == 0 or (np.linalg.norm(means[:accepted] - candidate, axis=1) >= min_sep).all():
            means[accepted] = candidate
            accepted += 1
        elif attempts % 250 == 0:
            scale *= 1.5
    return means


def generate_fixture_planted(spec: FixtureSpec):
    """Generate the fixture plus its planted structure.

    Returns (dataset, planted, means) where planted[i] is the global cluster
    index of item i and means has one row per cluster (class-major order).
    """
    _check_fixture(spec)
    rng = np.random.default_rng(spec.seed)
    classes = spec.num_classes
    per_class = spec.clusters_per_class
    total_clusters = classes * per_class
    means = _draw_cluster_means(rng, total_clusters, spec.dim, spec.separation * spec.noise_sigma)

    base, extra = divmod(spec.count_per_class, per_class)
    blocks = []
    labels = []
    planted = []
    for c in range(classes):
        for j in range(per_class):
            g = c * per_class + j
            count = base + (1 if j < extra else 0)
            if count == 0:
                continue
            noise = rng.normal(0.0, spec.noise_sigma, size=(count, spec.dim))
            blocks.append(means[g] + noise)
            labels.extend([c] * count)
            planted.extend([g] * count)

    vectors = np.concatenate(blocks, axis=0)
    # quantize to f32 so that generated pools survive file round-trips exactly
    vectors = vectors.astype(np.float32).astype(np.float64)
    dataset = EmbeddingSet(vectors, np.asarray(labels, dtype=np.int64), classes)
    return dataset, np.asarray(planted, dtype=np.int64), means


def generate_fixture(spec: FixtureSpec) -> EmbeddingSet:
    """Deterministic synthetic pool; identical specs give identical sets."""
    dataset, _, _ = generate_fixture_planted(spec)
    return dataset
