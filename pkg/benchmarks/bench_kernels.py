"""Benchmark the numba kernels against the pure-numpy/Python fallbacks.

Runs the two hot paths (pairwise squared distances and the greedy
node-moving sweep, driven through full community detection) on a realistic
per-class workload and prints per-path timings with the speedup.

Usage: python benchmarks/bench_kernels.py [--nodes 1000] [--dim 32] [--repeat 3]
"""

import argparse
import time

import numpy as np

from infodist import _kernels
from infodist.community import OptimizerConfig, detect_communities
from infodist.embedding_io import FixtureSpec, generate_fixture
from infodist.graph_builder import GraphConfig, build_class_graph
from infodist.map_equation import FlowConfig


def time_call(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def bench_pairwise(X, repeat):
    rows = []
    if _kernels.pairwise_sq_dists_numba is not None:
        _kernels.pairwise_sq_dists_numba(X[:8])  # compile outside the timing
        t_nb, d_nb = time_call(lambda: _kernels.pairwise_sq_dists_numba(X), repeat)
        rows.append(("numba", t_nb))
    t_np, d_np = time_call(lambda: _kernels.pairwise_sq_dists_numpy(X), repeat)
    rows.append(("numpy", t_np))
    if len(rows) == 2:
        assert np.allclose(d_nb, d_np, rtol=1e-12, atol=1e-12)
    return rows


def bench_detect(graph, repeat):
    flow = FlowConfig(teleport=0.15)
    config = OptimizerConfig(seed=0)
    rows = []
    original = _kernels.node_move_pass
    try:
        if _kernels.node_move_pass_numba is not None:
            _kernels.node_move_pass = _kernels.node_move_pass_numba
            detect_communities(graph, flow, config)  # compile + warm
            t_nb, (part_nb, L_nb) = time_call(
                lambda: detect_communities(graph, flow, config), repeat)
            rows.append(("numba", t_nb, part_nb.num_modules, L_nb))
        _kernels.node_move_pass = _kernels.node_move_pass_numpy
        t_py, (part_py, L_py) = time_call(
            lambda: detect_communities(graph, flow, config), repeat)
        rows.append(("python", t_py, part_py.num_modules, L_py))
    finally:
        _kernels.node_move_pass = original
    return rows


def report(title, rows, value_fmt=None):
    print(f"\n{title}")
    baseline = rows[-1][1]
    for row in rows:
        name, t = row[0], row[1]
        extra = ""
        if value_fmt and len(row) > 2:
            extra = "  " + value_fmt(row)
        speedup = baseline / t if t > 0 else float("inf")
        print(f"  {name:<7} {t * 1000:10.2f} ms   x{speedup:5.1f}{extra}")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--nodes", type=int, default=1000)
    parser.add_argument("--dim", type=int, default=32)
    parser.add_argument("--knn", type=int, default=10)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    spec = FixtureSpec(seed=0, num_classes=1, clusters_per_class=2, dim=args.dim,
                       count_per_class=args.nodes, separation=4.0, noise_sigma=1.0)
    pool = generate_fixture(spec)
    X = pool.vectors

    print(f"workload: {args.nodes} nodes, dim {args.dim}, knn {args.knn} "
          f"(numba available: {_kernels.HAS_NUMBA}, active: {_kernels.USE_NUMBA})")

    report(f"pairwise squared distances ({args.nodes} x {args.nodes})",
           bench_pairwise(X, args.repeat))

    graph = build_class_graph(pool, 0, GraphConfig(mode="knn", k=args.knn))
    report(f"community detection (greedy sweeps, {graph.num_edges} edges)",
           bench_detect(graph, args.repeat),
           value_fmt=lambda r: f"modules={r[2]} L={r[3]:.6f}")


if __name__ == "__main__":
    main()
