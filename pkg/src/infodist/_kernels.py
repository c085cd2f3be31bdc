"""Numeric kernels, each with a numba-compiled and a plain-Python/numpy path.

The active path is picked once at import time: numba is used when it imports
and the environment variable ``INFODIST_NUMBA`` is not ``0``/``false``/``off``.
Both variants stay importable under explicit names (``*_numba``, ``*_numpy``)
so the benchmark suite can time them against each other.
"""

from __future__ import annotations

import os

import numpy as np


def _numba_enabled() -> bool:
    return os.environ.get("INFODIST_NUMBA", "1").strip().lower() not in ("0", "false", "off")


try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _numba_enabled()


# ---------------------------------------------------------------------------
# pairwise squared distances
# ---------------------------------------------------------------------------

def _pairwise_sq_dists_loops(X):
    n, d = X.shape
    out = np.empty((n, n))
    for i in range(n):
        out[i, i] = 0.0
        for j in range(i + 1, n):
            s = 0.0
            for k in range(d):
                diff = X[i, k] - X[j, k]
                s += diff * diff
            out[i, j] = s
            out[j, i] = s
    return out


def pairwise_sq_dists_numpy(X):
    """Exact row-blocked evaluation; symmetric because (i,j) and (j,i) run
    the identical summation."""
    n = X.shape[0]
    out = np.empty((n, n))
    for i in range(n):
        diff = X - X[i]
        np.einsum("jk,jk->j", diff, diff, out=out[i])
        out[i, i] = 0.0
    return out


if HAS_NUMBA:
    pairwise_sq_dists_numba = njit(cache=True)(_pairwise_sq_dists_loops)
else:  # pragma: no cover
    pairwise_sq_dists_numba = None

pairwise_sq_dists = pairwise_sq_dists_numba if USE_NUMBA else pairwise_sq_dists_numpy


# ---------------------------------------------------------------------------
# greedy node-moving sweep for codelength minimization
# ---------------------------------------------------------------------------
#
# One sweep visits nodes in the given order and moves each to the neighbor
# module with the largest codelength decrease, applying moves immediately.
# Works on CSR views of the transition flow (visit rate times transition
# probability per edge) plus per-module aggregates maintained in place:
#   module_mass  = sum of visit rates of member nodes
#   module_size  = member count
#   walk_exit    = flow mass leaving the module per step (walk part only)
# Codelength deltas use the plogp expansion of the two-level objective; the
# exit mass of module i is (1-teleport)*walk_exit + teleport*mass*(1-size/n).

def _node_move_pass_impl(order, assignment,
                         module_mass, module_size, walk_exit,
                         out_ptr, out_dst, out_flow,
                         in_ptr, in_src, in_flow,
                         nbr_ptr, nbr_idx,
                         visit, teleport, min_improvement, total_exit,
                         acc_out, acc_in, acc_stamp, cand_stamp, cand_buf,
                         applied_deltas, stamp):
    n = assignment.shape[0]
    inv_n = 1.0 / n
    walk_keep = 1.0 - teleport

    def plogp(x):
        if x <= 0.0:
            return 0.0
        return x * np.log2(x)

    def exit_mass(w, mass, size):
        return walk_keep * w + teleport * mass * (1.0 - size * inv_n)

    improvement = 0.0
    moves = 0
    for oi in range(n):
        a = order[oi]
        src_mod = assignment[a]
        p_a = visit[a]
        stamp += 1

        # bucket the node's incident transition flow by current module
        for e in range(out_ptr[a], out_ptr[a + 1]):
            m = assignment[out_dst[e]]
            if acc_stamp[m] != stamp:
                acc_stamp[m] = stamp
                acc_out[m] = 0.0
                acc_in[m] = 0.0
            acc_out[m] += out_flow[e]
        for e in range(in_ptr[a], in_ptr[a + 1]):
            m = assignment[in_src[e]]
            if acc_stamp[m] != stamp:
                acc_stamp[m] = stamp
                acc_out[m] = 0.0
                acc_in[m] = 0.0
            acc_in[m] += in_flow[e]

        # candidate targets: modules of real graph neighbors only
        ncand = 0
        for e in range(nbr_ptr[a], nbr_ptr[a + 1]):
            m = assignment[nbr_idx[e]]
            if m != src_mod and cand_stamp[m] != stamp:
                cand_stamp[m] = stamp
                cand_buf[ncand] = m
                ncand += 1
        if ncand == 0:
            continue

        if acc_stamp[src_mod] == stamp:
            flow_to_src = acc_out[src_mod]
            flow_from_src = acc_in[src_mod]
        else:
            flow_to_src = 0.0
            flow_from_src = 0.0

        mass_s = module_mass[src_mod]
        size_s = module_size[src_mod]
        wexit_s = walk_exit[src_mod]
        q_s = exit_mass(wexit_s, mass_s, size_s)
        mass_s_new = mass_s - p_a
        size_s_new = size_s - 1
        wexit_s_new = wexit_s - (p_a - flow_to_src) + flow_from_src
        if size_s_new == 0:
            mass_s_new = 0.0
            wexit_s_new = 0.0
        q_s_new = exit_mass(wexit_s_new, mass_s_new, size_s_new)

        src_terms = (-2.0 * (plogp(q_s_new) - plogp(q_s))
                     + plogp(q_s_new + mass_s_new) - plogp(q_s + mass_s))

        best_delta = np.inf
        best_target = -1
        for ci in range(ncand):
            t = cand_buf[ci]
            if acc_stamp[t] == stamp:
                flow_to_t = acc_out[t]
                flow_from_t = acc_in[t]
            else:
                flow_to_t = 0.0
                flow_from_t = 0.0
            mass_t = module_mass[t]
            size_t = module_size[t]
            wexit_t = walk_exit[t]
            q_t = exit_mass(wexit_t, mass_t, size_t)
            mass_t_new = mass_t + p_a
            size_t_new = size_t + 1
            wexit_t_new = wexit_t + (p_a - flow_to_t) - flow_from_t
            q_t_new = exit_mass(wexit_t_new, mass_t_new, size_t_new)
            total_new = total_exit - q_s - q_t + q_s_new + q_t_new
            delta = (plogp(total_new) - plogp(total_exit)
                     + src_terms
                     - 2.0 * (plogp(q_t_new) - plogp(q_t))
                     + plogp(q_t_new + mass_t_new) - plogp(q_t + mass_t))
            if delta < best_delta or (delta == best_delta and t < best_target):
                best_delta = delta
                best_target = t

        if best_target >= 0 and best_delta < 0.0 and -best_delta >= min_improvement:
            t = best_target
            if acc_stamp[t] == stamp:
                flow_to_t = acc_out[t]
                flow_from_t = acc_in[t]
            else:
                flow_to_t = 0.0
                flow_from_t = 0.0
            q_t = exit_mass(walk_exit[t], module_mass[t], module_size[t])
            module_mass[src_mod] = mass_s_new
            module_size[src_mod] = size_s_new
            walk_exit[src_mod] = wexit_s_new
            module_mass[t] += p_a
            module_size[t] += 1
            walk_exit[t] += (p_a - flow_to_t) - flow_from_t
            q_t_new = exit_mass(walk_exit[t], module_mass[t], module_size[t])
            total_exit = total_exit - q_s - q_t + q_s_new + q_t_new
            assignment[a] = t
            applied_deltas[moves] = best_delta
            improvement += -best_delta
            moves += 1

    return total_exit, improvement, moves, stamp


if HAS_NUMBA:
    node_move_pass_numba = njit(cache=True)(_node_move_pass_impl)
else:  # pragma: no cover
    node_move_pass_numba = None

node_move_pass_numpy = _node_move_pass_impl
node_move_pass = node_move_pass_numba if USE_NUMBA else node_move_pass_numpy
