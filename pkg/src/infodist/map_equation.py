"""Random-walk flow and the two-level codelength objective.

The flow model is a PageRank-style walk with recorded teleportation: visit
rates solve p <- teleport * uniform + (1 - teleport) * p P. A module's exit
mass combines the walk flow leaving it with the teleport mass landing
outside it, teleport * p_a * (1 - module_size / n) per member node.

Codelength is evaluated in bits through the plogp expansion

    L = plogp(q) - 2 * sum_i plogp(q_i) + sum_i plogp(q_i + S_i)
        - sum_a plogp(p_a)

with q_i the exit mass of module i, S_i its visit mass and q the total exit
mass; this equals the entropy form exactly and makes single-move deltas
cheap because only the two affected modules change.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph_builder import ClassGraph


@dataclass
class FlowConfig:
    teleport: float = 0.15
    tol: float = 1e-12
    max_iters: int = 10_000

    def __post_init__(self):
        if not 0.0 <= self.teleport < 1.0:
            raise ValueError("teleport must be in [0, 1)")
        if self.tol <= 0 or self.max_iters < 1:
            raise ValueError("tol and max_iters must be positive")


class ConvergenceError(RuntimeError):
    """Power iteration failed to reach the requested tolerance."""


@dataclass
class Partition:
    """Module assignment with compact indices 0..num_modules-1."""

    assignment: np.ndarray  # (n,) int64
    num_modules: int

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int64)
        self.num_modules = int(self.num_modules)

    def __len__(self) -> int:
        return self.assignment.shape[0]

    def validate(self) -> None:
        present = np.unique(self.assignment)
        expected = np.arange(self.num_modules)
        if present.shape != expected.shape or (present != expected).any():
            raise ValueError("module indices must be exactly 0..num_modules-1")

    def module_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.num_modules)

    def members(self, module: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == module)

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(np.arange(n, dtype=np.int64), n)

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Compact arbitrary labels into module indices by first appearance."""
        labels = np.asarray(labels)
        _, first = np.unique(labels, return_index=True)
        order = labels[np.sort(first)]
        remap = {lab: i for i, lab in enumerate(order.tolist())}
        assignment = np.asarray([remap[lab] for lab in labels.tolist()], dtype=np.int64)
        return cls(assignment, len(remap))


@dataclass
class FlowStats:
    """Flow quantities of one (graph, partition) pair."""

    visit_rates: np.ndarray     # (n,) stationary visit probabilities
    transition: np.ndarray      # (n, n) row-stochastic matrix
    teleport: float
    module_exit: np.ndarray     # (m,) exit mass q_i
    total_exit: float           # q = sum_i q_i
    module_stay: np.ndarray     # (m,) q_i + S_i
    module_mass: np.ndarray     # (m,) S_i = visit mass of members
    module_size: np.ndarray     # (m,) member counts
    walk_exit: np.ndarray       # (m,) walk-only exit flow (pre teleport mix)


def plogp(x):
    """x * log2(x) with 0 at x <= 0 (guards tiny negative drift)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    mask = x > 0
    out[mask] = x[mask] * np.log2(x[mask])
    if out.ndim == 0:
        return float(out)
    return out


def transition_matrix(graph: ClassGraph) -> np.ndarray:
    """Outgoing weights renormalized per row; dangling rows become uniform
    over the other nodes."""
    n = graph.num_nodes
    if n < 2:
        raise ValueError("graph too small")
    W = graph.weights
    out_sum = W.sum(axis=1)
    P = np.zeros_like(W)
    live = out_sum > 0
    P[live] = W[live] / out_sum[live, None]
    if (~live).any():
        dangling = np.flatnonzero(~live)
        P[dangling] = 1.0 / (n - 1)
        P[dangling, dangling] = 0.0
    return P


def visit_rates(P: np.ndarray, teleport: float = 0.15, tol: float = 1e-12,
                max_iters: int = 10_000) -> np.ndarray:
    """Fixed point of p <- teleport*uniform + (1-teleport) * p P."""
    n = P.shape[0]
    p = np.full(n, 1.0 / n)
    base = teleport / n
    for _ in range(max_iters):
        p_next = base + (1.0 - teleport) * (p @ P)
        if np.abs(p_next - p).sum() < tol:
            return p_next
        p = p_next
    raise ConvergenceError(f"visit rates did not converge within {max_iters} iterations")


def module_flows(P: np.ndarray, visit: np.ndarray, partition: Partition,
                 teleport: float = 0.15) -> FlowStats:
    """Aggregate per-module flow quantities for a partition."""
    n = P.shape[0]
    m = partition.num_modules
    assignment = partition.assignment
    if assignment.shape[0] != n or visit.shape[0] != n:
        raise ValueError("inconsistent dimensions")

    mass = np.bincount(assignment, weights=visit, minlength=m)
    size = partition.module_sizes()

    flow = visit[:, None] * P
    module_flow = np.zeros((m, m))
    np.add.at(module_flow, (assignment[:, None], assignment[None, :]), flow)
    walk_exit = module_flow.sum(axis=1) - np.diagonal(module_flow)

    exit_mass = (1.0 - teleport) * walk_exit + teleport * mass * (1.0 - size / n)
    exit_mass = np.maximum(exit_mass, 0.0)
    return FlowStats(
        visit_rates=visit,
        transition=P,
        teleport=teleport,
        module_exit=exit_mass,
        total_exit=float(exit_mass.sum()),
        module_stay=exit_mass + mass,
        module_mass=mass,
        module_size=size,
        walk_exit=walk_exit,
    )


def codelength(stats: FlowStats, partition: Partition) -> float:
    """Two-level codelength in bits for the partition behind ``stats``."""
    if stats.module_exit.shape[0] != partition.num_modules:
        raise ValueError("stats do not match the partition")
    q = stats.module_exit
    total = stats.total_exit
    L = (plogp(total)
         - 2.0 * plogp(q).sum()
         + plogp(stats.module_stay).sum()
         - plogp(stats.visit_rates).sum())
    return float(L)


def _exit_mass(walk, mass, size, teleport, n):
    return (1.0 - teleport) * walk + teleport * mass * (1.0 - size / n)


def delta_codelength(stats: FlowStats, partition: Partition, node: int,
                     target_module: int) -> float:
    """Codelength change if ``node`` moves to ``target_module``.

    Only the source and target modules and the exit term are recomputed.
    """
    assignment = partition.assignment
    src = int(assignment[node])
    tgt = int(target_module)
    if src == tgt:
        raise ValueError("node already belongs to the target module")

    P = stats.transition
    p = stats.visit_rates
    n = p.shape[0]
    teleport = stats.teleport
    p_a = p[node]

    src_mask = assignment == src
    tgt_mask = assignment == tgt
    flow_to_src = p_a * P[node, src_mask].sum()
    flow_from_src = (p[src_mask] * P[src_mask, node]).sum()
    flow_to_tgt = p_a * P[node, tgt_mask].sum()
    flow_from_tgt = (p[tgt_mask] * P[tgt_mask, node]).sum()

    mass_s, size_s, walk_s = stats.module_mass[src], stats.module_size[src], stats.walk_exit[src]
    mass_t, size_t, walk_t = stats.module_mass[tgt], stats.module_size[tgt], stats.walk_exit[tgt]

    q_s = _exit_mass(walk_s, mass_s, size_s, teleport, n)
    q_t = _exit_mass(walk_t, mass_t, size_t, teleport, n)

    mass_s_new = mass_s - p_a
    size_s_new = size_s - 1
    walk_s_new = walk_s - (p_a - flow_to_src) + flow_from_src
    if size_s_new == 0:
        mass_s_new = 0.0
        walk_s_new = 0.0
    mass_t_new = mass_t + p_a
    size_t_new = size_t + 1
    walk_t_new = walk_t + (p_a - flow_to_tgt) - flow_from_tgt

    q_s_new = _exit_mass(walk_s_new, mass_s_new, size_s_new, teleport, n)
    q_t_new = _exit_mass(walk_t_new, mass_t_new, size_t_new, teleport, n)
    total_new = stats.total_exit - q_s - q_t + q_s_new + q_t_new

    return float(
        plogp(total_new) - plogp(stats.total_exit)
        - 2.0 * (plogp(q_s_new) + plogp(q_t_new) - plogp(q_s) - plogp(q_t))
        + plogp(q_s_new + mass_s_new) + plogp(q_t_new + mass_t_new)
        - plogp(q_s + mass_s) - plogp(q_t + mass_t)
    )


def flow_stats_for_graph(graph: ClassGraph, partition: Partition,
                         config: FlowConfig | None = None) -> FlowStats:
    """Convenience: transition matrix, visit rates and module flows in one go."""
    config = config or FlowConfig()
    P = transition_matrix(graph)
    p = visit_rates(P, config.teleport, config.tol, config.max_iters)
    return module_flows(P, p, partition, config.teleport)
