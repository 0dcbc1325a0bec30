"""Solver-neutral sparse linear / mixed-integer model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

LE, EQ, GE = "<=", "=", ">="
SENSES = (LE, EQ, GE)


class ModelError(ValueError):
    pass


@dataclass
class LinearModel:
    """Minimization model with named variables and sparse rows.

    Variables and constraints keep insertion order; that order is the
    canonical order used by export and by the solvers.
    """

    name: str = "model"
    var_names: list[str] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    integer: list[bool] = field(default_factory=list)
    con_names: list[str] = field(default_factory=list)
    rows: list[tuple[tuple[int, ...], tuple[float, ...]]] = field(default_factory=list)
    senses: list[str] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        self._var_index = {n: k for k, n in enumerate(self.var_names)}
        self._con_index = {n: k for k, n in enumerate(self.con_names)}

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_cons(self) -> int:
        return len(self.con_names)

    @property
    def has_integers(self) -> bool:
        return any(self.integer)

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf, integer: bool = False) -> int:
        if name in self._var_index:
            raise ModelError(f"duplicate variable {name}")
        if lb > ub:
            raise ModelError(f"variable {name}: lower bound {lb} above upper bound {ub}")
        k = len(self.var_names)
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.integer.append(bool(integer))
        self._var_index[name] = k
        return k

    def add_constraint(
        self, name: str, coefs: Iterable[tuple[int, float]], sense: str, rhs: float
    ) -> int:
        if name in self._con_index:
            raise ModelError(f"duplicate constraint {name}")
        if sense not in SENSES:
            raise ModelError(f"constraint {name}: unknown sense {sense!r}")
        merged: dict[int, float] = {}
        for j, a in coefs:
            if not 0 <= j < self.n_vars:
                raise ModelError(f"constraint {name} references unknown variable {j}")
            merged[j] = merged.get(j, 0.0) + float(a)
        idx = tuple(sorted(j for j in merged if merged[j] != 0.0))
        k = len(self.con_names)
        self.con_names.append(name)
        self.rows.append((idx, tuple(merged[j] for j in idx)))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self._con_index[name] = k
        return k

    def add_objective(self, j: int, coef: float) -> None:
        v = self.objective.get(j, 0.0) + float(coef)
        if v == 0.0:
            self.objective.pop(j, None)
        else:
            self.objective[j] = v

    def var(self, name: str) -> int:
        return self._var_index[name]

    def con(self, name: str) -> int:
        return self._con_index[name]

    # numeric views -----------------------------------------------------
    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for j, a in self.objective.items():
            c[j] = a
        return c

    def matrix(self) -> sparse.csr_matrix:
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        for idx, coef in self.rows:
            indices.extend(idx)
            data.extend(coef)
            indptr.append(len(indices))
        return sparse.csr_matrix(
            (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
            shape=(self.n_cons, self.n_vars),
        )

    def objective_value(self, values: Sequence[float]) -> float:
        return float(sum(a * values[j] for j, a in self.objective.items()))

    def same_as(self, other: "LinearModel") -> bool:
        """Structural equality (names, bounds, rows, objective)."""
        return (
            self.var_names == other.var_names
            and self.lb == other.lb
            and self.ub == other.ub
            and self.integer == other.integer
            and self.con_names == other.con_names
            and self.rows == other.rows
            and self.senses == other.senses
            and self.rhs == other.rhs
            and self.objective == other.objective
        )


@dataclass(frozen=True)
class ComplexityReport:
    n_variables: int
    n_constraints: int

    @property
    def total(self) -> int:
        return self.n_variables + self.n_constraints


def count_complexity(model: LinearModel) -> ComplexityReport:
    """Declared variables and rows; bounds are not rows."""
    return ComplexityReport(model.n_vars, model.n_cons)


@dataclass
class Residuals:
    max_constraint: float
    max_bound: float
    max_integrality: float
    worst: list[tuple[str, float]]

    @property
    def max(self) -> float:
        return max(self.max_constraint, self.max_bound)


def check_solution(model: LinearModel, values: Sequence[float], top: int = 10) -> Residuals:
    """Recompute every row and bound at ``values`` and report violations."""
    x = np.asarray(values, dtype=float)
    if x.shape != (model.n_vars,):
        raise ModelError(f"expected {model.n_vars} values, got {x.shape}")
    viol = np.zeros(model.n_cons)
    if model.n_cons:
        lhs = model.matrix() @ x
        rhs = np.asarray(model.rhs)
        sense = np.asarray(model.senses)
        viol = np.where(sense == LE, np.maximum(lhs - rhs, 0.0), 0.0)
        viol = np.where(sense == GE, np.maximum(rhs - lhs, 0.0), viol)
        viol = np.where(sense == EQ, np.abs(lhs - rhs), viol)
    bound = np.maximum(np.maximum(np.asarray(model.lb) - x, x - np.asarray(model.ub)), 0.0) if model.n_vars else np.zeros(0)
    ints = np.asarray(model.integer, dtype=bool)
    integ = np.abs(x[ints] - np.round(x[ints])) if ints.any() else np.zeros(0)
    order = np.argsort(-viol, kind="stable")[:top]
    worst = [(model.con_names[k], float(viol[k])) for k in order if viol[k] > 0]
    return Residuals(
        float(viol.max(initial=0.0)), float(bound.max(initial=0.0)), float(integ.max(initial=0.0)), worst
    )
