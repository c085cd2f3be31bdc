"""Node scoring, per-community quota allocation, and distilled selection.

Modular centrality scores a node by its incident edge weight split into the
within-community and cross-community parts, scalarized as the L2 norm of the
pair (a plain sum is available for ablation). Enter/exit flow alternates
rank nodes by stationary transition flow instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .community import OptimizerConfig, detect_communities
from .embedding_io import EmbeddingSet
from .graph_builder import ClassGraph, GraphConfig, build_class_graph
from .map_equation import FlowConfig, FlowStats, Partition, flow_stats_for_graph

VARIANTS = ("modular", "enter", "exit")


@dataclass
class SelectionMetric:
    variant: str = "modular"        # "modular" | "enter" | "exit"
    scalarization: str = "l2"       # "l2" | "sum", modular centrality only

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown metric variant {self.variant!r}")
        if self.scalarization not in ("l2", "sum"):
            raise ValueError(f"unknown scalarization {self.scalarization!r}")


@dataclass
class DistilledSelection:
    """Selected item ids per class plus the per-community quotas used."""

    per_class: dict = field(default_factory=dict)   # class -> sorted int64 ids
    quotas: dict = field(default_factory=dict)      # class -> per-community counts
    total_per_class: int = 0

    def all_ids(self) -> np.ndarray:
        if not self.per_class:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([self.per_class[c] for c in sorted(self.per_class)])

    def validate(self) -> None:
        for c, ids in self.per_class.items():
            if len(np.unique(ids)) != len(ids):
                raise ValueError(f"duplicate selection ids for class {c}")
            if len(ids) != self.total_per_class:
                raise ValueError(f"class {c} selection size {len(ids)} != {self.total_per_class}")
            if c in self.quotas and int(np.sum(self.quotas[c])) != self.total_per_class:
                raise ValueError(f"class {c} quotas do not sum to {self.total_per_class}")


def _incident_by_community(graph: ClassGraph, partition: Partition):
    """Per node: (within-community, cross-community) incident weight sums,
    counting incoming plus outgoing edges."""
    W = graph.weights
    assignment = partition.assignment
    m = partition.num_modules
    onehot = np.zeros((len(assignment), m))
    onehot[np.arange(len(assignment)), assignment] = 1.0
    out_by_mod = W @ onehot           # (n, m) outgoing weight into each module
    in_by_mod = W.T @ onehot          # (n, m) incoming weight from each module
    rows = np.arange(len(assignment))
    intra = out_by_mod[rows, assignment] + in_by_mod[rows, assignment]
    inter = (W.sum(axis=1) + W.sum(axis=0)) - intra
    return intra, np.maximum(inter, 0.0)


def modular_centrality(graph: ClassGraph, partition: Partition, node: int,
                       scalarization: str = "l2") -> float:
    """Score of one node; see ``modular_centrality_scores`` for all nodes."""
    return float(modular_centrality_scores(graph, partition, scalarization)[node])


def modular_centrality_scores(graph: ClassGraph, partition: Partition,
                              scalarization: str = "l2") -> np.ndarray:
    intra, inter = _incident_by_community(graph, partition)
    if scalarization == "sum":
        return intra + inter
    return np.hypot(intra, inter)


def flow_score(stats: FlowStats, node: int, metric: SelectionMetric) -> float:
    return float(flow_scores(stats, metric)[node])


def flow_scores(stats: FlowStats, metric: SelectionMetric) -> np.ndarray:
    """Stationary per-step flow entering (or leaving) each node, walk part only."""
    p = stats.visit_rates
    P = stats.transition
    keep = 1.0 - stats.teleport
    if metric.variant == "enter":
        return (p @ P - p * np.diagonal(P)) * keep
    if metric.variant == "exit":
        return p * (1.0 - np.diagonal(P)) * keep
    raise ValueError("flow_score requires the enter or exit variant")


def _largest_remainder(weights, units, tie_order=None):
    """Integer allocation of ``units`` proportional to ``weights`` with
    largest-remainder rounding; remainder ties go to the smaller index."""
    weights = np.asarray(weights, dtype=np.float64)
    total = weights.sum()
    if total <= 0:
        raise ValueError("weights must have positive sum")
    exact = units * weights / total
    alloc = np.floor(exact).astype(np.int64)
    leftover = units - int(alloc.sum())
    if leftover > 0:
        remainders = exact - alloc
        order = np.lexsort((np.arange(len(weights)), -remainders))
        alloc[order[:leftover]] += 1
    return alloc


def allocate_quotas(partition: Partition, n_select: int) -> np.ndarray:
    """Per-community selection counts summing exactly to ``n_select``.

    Proportional to community sizes via largest remainder, clamped at the
    community size with surplus redistribution, and guaranteeing one slot
    per community whenever n_select >= num_modules.
    """
    sizes = partition.module_sizes()
    n = int(sizes.sum())
    m = len(sizes)
    if n_select < 1:
        raise ValueError("n_select must be positive")
    if n_select > n:
        raise ValueError(f"cannot select {n_select} from {n} nodes")

    quotas = _largest_remainder(sizes, n_select)

    # clamp at community size, redistribute surplus among unclamped
    while True:
        over = quotas > sizes
        if not over.any():
            break
        surplus = int((quotas - sizes)[over].sum())
        quotas[over] = sizes[over]
        free = quotas < sizes
        if not free.any():
            raise AssertionError("surplus with no free capacity")
        add = _largest_remainder(sizes[free], surplus)
        quotas[np.flatnonzero(free)] += add

    # every community gets at least one slot when the budget allows it
    if n_select >= m:
        while (quotas == 0).any():
            recipient = int(np.flatnonzero(quotas == 0)[0])
            donors = np.flatnonzero(quotas >= 2)
            donor = int(donors[np.argmax(quotas[donors])])
            quotas[donor] -= 1
            quotas[recipient] += 1

    assert int(quotas.sum()) == n_select
    return quotas


def select_class(graph: ClassGraph, partition: Partition, stats: FlowStats | None,
                 metric: SelectionMetric, n_select: int) -> np.ndarray:
    """Top-scoring ids per community under the community quotas, returned in
    ascending id order. Score ties break to the smaller node ordinal.

    ``stats`` is only consulted by the enter/exit flow variants and may be
    None for modular centrality."""
    quotas = allocate_quotas(partition, n_select)
    if metric.variant == "modular":
        scores = modular_centrality_scores(graph, partition, metric.scalarization)
    else:
        if stats is None:
            raise ValueError("flow metrics require flow stats")
        scores = flow_scores(stats, metric)

    chosen = []
    for module in range(partition.num_modules):
        members = partition.members(module)
        order = np.lexsort((members, -scores[members]))
        chosen.append(members[order[: quotas[module]]])
    ordinals = np.sort(np.concatenate(chosen))
    return graph.node_ids[ordinals]


def distill(dataset: EmbeddingSet, graph_config: GraphConfig | None = None,
            flow_config: FlowConfig | None = None,
            optimizer_config: OptimizerConfig | None = None,
            metric: SelectionMetric | None = None,
            per_class: int = 100) -> DistilledSelection:
    """Graph build, community detection and selection independently per class.

    The optimizer seed is derived per class as ``seed XOR class_label`` so
    classes can be processed in any order (or in parallel) identically.
    """
    graph_config = graph_config or GraphConfig()
    flow_config = flow_config or FlowConfig()
    optimizer_config = optimizer_config or OptimizerConfig()
    metric = metric or SelectionMetric()
    dataset.validate(require_all_classes=True)

    counts = dataset.class_counts()
    short = np.flatnonzero(counts < per_class)
    if short.size:
        c = int(short[0])
        raise ValueError(f"class {c} has {int(counts[c])} items, fewer than {per_class}")

    selection = DistilledSelection(total_per_class=per_class)
    for label in range(dataset.num_classes):
        graph = build_class_graph(dataset, label, graph_config)
        class_opt = OptimizerConfig(seed=optimizer_config.seed ^ label,
                                    max_passes=optimizer_config.max_passes,
                                    min_improvement=optimizer_config.min_improvement)
        partition, _ = detect_communities(graph, flow_config, class_opt)
        stats = flow_stats_for_graph(graph, partition, flow_config)
        selection.per_class[label] = select_class(graph, partition, stats, metric, per_class)
        selection.quotas[label] = allocate_quotas(partition, per_class)
    selection.validate()
    return selection


def write_selection(selection: DistilledSelection, path) -> None:
    """One ``class<TAB>id`` line per selected item, sorted by class then id."""
    lines = []
    for c in sorted(selection.per_class):
        for i in selection.per_class[c]:
            lines.append(f"{c}\t{int(i)}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_selection(path) -> DistilledSelection:
    per_class: dict = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if not raw.strip():
            continue
        c, i = raw.split("\t")
        per_class.setdefault(int(c), []).append(int(i))
    sizes = {len(v) for v in per_class.values()}
    if len(sizes) > 1:
        raise ValueError("selection file has unequal per-class sizes")
    selection = DistilledSelection(
        per_class={c: np.asarray(sorted(v), dtype=np.int64) for c, v in per_class.items()},
        total_per_class=sizes.pop() if sizes else 0,
    )
    return selection


def write_selection_summary(selection: DistilledSelection, path) -> None:
    """Sidecar key-value summary: per-class community counts and quotas."""
    lines = [f"total_per_class = {selection.total_per_class}"]
    for c in sorted(selection.quotas):
        quotas = selection.quotas[c]
        lines.append(f"class_{c}.communities = {len(quotas)}")
        lines.append(f"class_{c}.quotas = {','.join(str(int(q)) for q in quotas)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
