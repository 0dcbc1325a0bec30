"""Solve interface and back-ends.

``reference``
    HiGHS dual simplex (through :func:`scipy.optimize.linprog`) for LPs,
    and the best-first branch-and-bound in :mod:`sodta.lp.bnb` when the
    model has integer columns.
``highs-mip``
    HiGHS' own MIP solver through :func:`scipy.optimize.milp`.
``cbc``
    External CBC binary driven through an MPS file (see
    :mod:`sodta.lp.external`).
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import optimize, sparse

from .model import EQ, GE, LE, LinearModel


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    LIMIT = "limit"


class SolverError(RuntimeError):
    pass


@dataclass
class SolveOptions:
    backend: str = "reference"
    primal_tol: float = 1e-7
    dual_tol: float = 1e-7
    integrality_tol: float = 1e-6
    mip_gap: float = 1e-6
    node_limit: int = 100_000
    iteration_limit: int | None = None
    time_limit: float | None = None
    solver_path: str | None = None
    presolve: bool = True


@dataclass
class Solution:
    status: Status
    objective: float | None = None
    values: np.ndarray | None = None
    stats: dict[str, Any] = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass
class _Arrays:
    c: np.ndarray
    A_ub: sparse.csr_matrix | None
    b_ub: np.ndarray | None
    A_eq: sparse.csr_matrix | None
    b_eq: np.ndarray | None
    lb: np.ndarray
    ub: np.ndarray


def to_arrays(model: LinearModel) -> _Arrays:
    A = model.matrix()
    senses = np.asarray(model.senses, dtype=object)
    rhs = np.asarray(model.rhs, dtype=float)
    le = np.flatnonzero(senses == LE)
    ge = np.flatnonzero(senses == GE)
    eq = np.flatnonzero(senses == EQ)
    ub_rows = sparse.vstack([A[le], -A[ge]], format="csr") if len(le) + len(ge) else None
    b_ub = np.concatenate([rhs[le], -rhs[ge]]) if ub_rows is not None else None
    A_eq = A[eq] if len(eq) else None
    b_eq = rhs[eq] if len(eq) else None
    return _Arrays(
        model.cost_vector(), ub_rows, b_ub, A_eq, b_eq,
        np.asarray(model.lb, dtype=float), np.asarray(model.ub, dtype=float),
    )


def solve_lp_arrays(arr: _Arrays, opts: SolveOptions, lb=None, ub=None) -> Solution:
    lb = arr.lb if lb is None else lb
    ub = arr.ub if ub is None else ub
    if arr.c.size == 0:
        return Solution(Status.OPTIMAL, 0.0, np.zeros(0), {"iterations": 0})
    options = {
        "primal_feasibility_tolerance": opts.primal_tol,
        "dual_feasibility_tolerance": opts.dual_tol,
        "presolve": opts.presolve,
    }
    if opts.iteration_limit is not None:
        options["maxiter"] = opts.iteration_limit
    if opts.time_limit is not None:
        options["time_limit"] = opts.time_limit
    bounds = np.column_stack([np.where(np.isinf(lb), -np.inf, lb), np.where(np.isinf(ub), np.inf, ub)])
    res = optimize.linprog(
        arr.c, A_ub=arr.A_ub, b_ub=arr.b_ub, A_eq=arr.A_eq, b_eq=arr.b_eq,
        bounds=bounds, method="highs-ds", options=options,
    )
    stats = {"iterations": int(getattr(res, "nit", 0) or 0), "message": res.message}
    if res.status == 0:
        return Solution(Status.OPTIMAL, float(res.fun), np.asarray(res.x, dtype=float), stats)
    if res.status == 1:
        return Solution(Status.LIMIT, None, None, stats)
    if res.status == 2:
        return Solution(Status.INFEASIBLE, None, None, stats)
    if res.status == 3:
        return Solution(Status.UNBOUNDED, None, None, stats)
    raise SolverError(f"HiGHS failed: {res.message}")


def _solve_highs_mip(model: LinearModel, opts: SolveOptions) -> Solution:
    A = model.matrix()
    senses = np.asarray(model.senses, dtype=object)
    rhs = np.asarray(model.rhs, dtype=float)
    lo = np.where(senses == LE, -np.inf, rhs)
    hi = np.where(senses == GE, np.inf, rhs)
    constraints = [optimize.LinearConstraint(A, lo, hi)] if model.n_cons else []
    options = {"mip_rel_gap": opts.mip_gap, "presolve": opts.presolve}
    if opts.time_limit is not None:
        options["time_limit"] = opts.time_limit
    if opts.node_limit is not None:
        options["node_limit"] = opts.node_limit
    res = optimize.milp(
        model.cost_vector(), constraints=constraints,
        integrality=np.asarray(model.integer, dtype=int),
        bounds=optimize.Bounds(np.asarray(model.lb), np.asarray(model.ub)), options=options,
    )
    stats = {"message": res.message, "nodes": getattr(res, "mip_node_count", None)}
    if res.status == 0:
        return Solution(Status.OPTIMAL, float(res.fun), np.asarray(res.x, dtype=float), stats)
    if res.status == 1:
        if res.x is not None:
            stats["incumbent_objective"] = float(res.fun)
        return Solution(Status.LIMIT, None if res.x is None else float(res.fun), None, stats)
    if res.status == 2:
        return Solution(Status.INFEASIBLE, None, None, stats)
    if res.status == 3:
        return Solution(Status.UNBOUNDED, None, None, stats)
    raise SolverError(f"HiGHS MIP failed: {res.message}")


def solve(model: LinearModel, opts: SolveOptions | None = None) -> Solution:
    """Solve ``model`` (minimization) with the configured back-end."""
    opts = opts or SolveOptions()
    start = time.perf_counter()
    if opts.backend == "reference":
        if model.has_integers:
            from .bnb import branch_and_bound

            sol = branch_and_bound(model, opts)
        else:
            sol = solve_lp_arrays(to_arrays(model), opts)
            sol.stats.setdefault("nodes", 1)
    elif opts.backend == "highs-mip":
        sol = _solve_highs_mip(model, opts)
    elif opts.backend == "cbc":
        from .external import solve_cbc

        sol = solve_cbc(model, opts)
    else:
        raise ValueError(f"unknown solver back-end {opts.backend!r}")
    sol.stats["wall_time"] = time.perf_counter() - start
    sol.stats["backend"] = opts.backend
    if sol.values is not None:
        sol.values = np.clip(sol.values, np.asarray(model.lb), np.asarray(model.ub))
        if not math.isclose(model.objective_value(sol.values), sol.objective, rel_tol=1e-6, abs_tol=1e-6):
            raise SolverError(
                f"objective {sol.objective} disagrees with recomputed "
                f"{model.objective_value(sol.values)}"
            )
    return sol
