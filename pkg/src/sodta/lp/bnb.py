"""Best-first branch-and-bound over integer columns.

Each node is the LP relaxation with tightened bounds.  Children are solved
when created and queued by their LP bound; ties go to the older node.  The
branching variable is the lowest-index integer column whose value is
fractional beyond the integrality tolerance.
"""

from __future__ import annotations

import heapq
import itertools
import math

import numpy as np

from .model import LinearModel
from .solve import Solution, SolveOptions, Status, solve_lp_arrays, to_arrays


def _fractional(x: np.ndarray, int_idx: np.ndarray, tol: float) -> int | None:
    frac = np.abs(x[int_idx] - np.round(x[int_idx]))
    hits = np.flatnonzero(frac > tol)
    return None if hits.size == 0 else int(int_idx[hits[0]])


def _gap_closed(bound: float, incumbent: float, rel: float) -> bool:
    return incumbent - bound <= rel * max(1.0, abs(incumbent))


def branch_and_bound(model: LinearModel, opts: SolveOptions) -> Solution:
    arr = to_arrays(model)
    int_idx = np.flatnonzero(np.asarray(model.integer, dtype=bool))
    lb0, ub0 = arr.lb.copy(), arr.ub.copy()
    lb0[int_idx] = np.ceil(lb0[int_idx] - opts.integrality_tol)
    ub0[int_idx] = np.floor(ub0[int_idx] + opts.integrality_tol)

    root = solve_lp_arrays(arr, opts, lb0, ub0)
    lp_iters = root.stats.get("iterations", 0)
    if root.status is not Status.OPTIMAL:
        root.stats.update(nodes=1, lp_iterations=lp_iters)
        return root

    counter = itertools.count()
    heap = [(root.objective, next(counter), lb0, ub0, root.values)]
    incumbent, best_x = math.inf, None
    nodes = 1
    best_bound = root.objective
    while heap:
        bound, _, lb, ub, x = heapq.heappop(heap)
        best_bound = bound
        if best_x is not None and _gap_closed(bound, incumbent, opts.mip_gap):
            heap.clear()
            break
        j = _fractional(x, int_idx, opts.integrality_tol)
        if j is None:
            if bound < incumbent:
                incumbent, best_x = bound, x
            continue
        if nodes >= opts.node_limit:
            heapq.heappush(heap, (bound, next(counter), lb, ub, x))
            break
        for side in (0, 1):
            clb, cub = lb.copy(), ub.copy()
            if side == 0:
                cub[j] = math.floor(x[j])
            else:
                clb[j] = math.ceil(x[j])
            child = solve_lp_arrays(arr, opts, clb, cub)
            nodes += 1
            lp_iters += child.stats.get("iterations", 0)
            if child.status is Status.OPTIMAL and child.objective < incumbent:
                heapq.heappush(heap, (child.objective, next(counter), clb, cub, child.values))

    stats = {"nodes": nodes, "lp_iterations": lp_iters}
    if heap:
        stats["best_bound"] = min(h[0] for h in heap)
        stats["incumbent_objective"] = None if best_x is None else incumbent
        return Solution(Status.LIMIT, None if best_x is None else incumbent, None, stats)
    if best_x is None:
        return Solution(Status.INFEASIBLE, None, None, stats)
    stats["best_bound"] = best_bound
    x = best_x.copy()
    x[int_idx] = np.round(x[int_idx])
    return Solution(Status.OPTIMAL, model.objective_value(x), x, stats)
