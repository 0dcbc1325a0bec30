"""Signal-control constraints and green plans.

Three schemes restrict flow out of intersection cells:

* ``SCRC``: one continuous split per (intersection, phase, cycle), a cycle
  spanning ``m`` slots; every slot of a cycle uses the cycle's split.
* ``CSDT``: one continuous split per (intersection, phase, slot).
* ``MISC``: one binary per (intersection, phase, slot), exactly one phase
  active per slot; per-movement permissions ``kappa`` are the sum of the
  binaries of the phases serving the movement.

Split variables are per phase, so cells served by the same phase share a
split.  Pairing equalities (NEMA ``(1,5)``, ``(2,9)``...) and the sum-to-one
group come from the intersection definition and are only emitted for
phases that exist.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .demand import Horizon
from .lp.model import EQ, LE, LinearModel
from .lp.solve import Solution
from .network import Network


class SignalConfigError(ValueError):
    pass


class IntegrityError(ValueError):
    """A decoded green plan violates its structural constraints."""


class SignalKind(str, enum.Enum):
    SCRC = "SCRC"
    CSDT = "CSDT"
    MISC = "MISC"


def cycle_index(t: int, m: int) -> tuple[int, int]:
    """(cycle c, position eps within the cycle) of 1-based slot ``t``."""
    c = (t - 1) // m + 1
    return c, t - (c - 1) * m


@dataclass(frozen=True)
class CycleScheme:
    m: int
    T: int

    def __post_init__(self):
        if self.m < 1:
            raise SignalConfigError(f"cycle length must be at least one slot, got {self.m}")

    @property
    def c_max(self) -> int:
        return -(-self.T // self.m)

    def slots(self, c: int) -> range:
        return range((c - 1) * self.m + 1, min(c * self.m, self.T) + 1)


@dataclass(frozen=True)
class SignalModelConfig:
    kind: SignalKind
    m: int = 1
    g_min: float = 0.0
    pairing: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", SignalKind(self.kind))
        if self.m < 1:
            raise SignalConfigError("cycle length must be at least one slot")
        if not 0.0 <= self.g_min < 1.0:
            raise SignalConfigError("minimum green must lie in [0, 1)")

    @property
    def label(self) -> str:
        return f"SCRC{self.m}" if self.kind is SignalKind.SCRC else self.kind.value

    @property
    def period(self) -> int:
        """Slots per decision period."""
        return self.m if self.kind is SignalKind.SCRC else 1


@dataclass
class SignalIndex:
    config: SignalModelConfig
    T: int
    green: dict[tuple[str, int, int], int] = field(default_factory=dict)
    kappa: dict[tuple[str, str, int], int] = field(default_factory=dict)
    sigma: dict[tuple[str, str], list[tuple[str, int]]] = field(default_factory=dict)


def _sigma_map(net: Network) -> dict[tuple[str, str], list[tuple[str, int]]]:
    return {c.key: net.sigma(*c.key) for c in net.signalized_connectors()}


def _sum_group(inter) -> tuple[int, ...]:
    return inter.group_for_sum or inter.phases


def _check_structure(net: Network, cfg: SignalModelConfig) -> None:
    for inter in net.intersections:
        for a, b in inter.pairing_rules:
            if a not in inter.phases or b not in inter.phases:
                raise SignalConfigError(f"intersection {inter.id}: pairing ({a},{b}) names a missing phase")
        group = _sum_group(inter)
        if any(p not in inter.phases for p in group):
            raise SignalConfigError(f"intersection {inter.id}: sum group names a missing phase")
        if cfg.kind is not SignalKind.MISC and cfg.g_min * len(group) > 1.0 + 1e-12:
            raise SignalConfigError(
                f"intersection {inter.id}: minimum green {cfg.g_min} x {len(group)} phases exceeds 1"
            )
    for con in net.signalized_connectors():
        if not net.sigma(con.source, con.target):
            raise SignalConfigError(f"movement {con.source}->{con.target} is served by no phase")


def _build_split_model(net, horizon, cfg, index, model, prefix, period):
    """Shared SCRC/CSDT generator; CSDT is the period-1 case."""
    scheme = CycleScheme(period, horizon.T)
    sig = SignalIndex(cfg, horizon.T, sigma=_sigma_map(net))
    for inter in net.intersections:
        for c in range(1, scheme.c_max + 1):
            for p in inter.phases:
                sig.green[(inter.id, p, c)] = model.add_var(
                    f"{prefix}_{inter.id}_p{p}_{c}", cfg.g_min, 1.0
                )
    for t in horizon.slots:
        c, _ = cycle_index(t, period)
        for con in net.signalized_connectors():
            i, j = con.key
            q = net.cell(i).Q(t)
            row = [(index.y[(i, j, t)], 1.0)]
            row += [(sig.green[(iid, p, c)], -q) for iid, p in net.sigma(i, j)]
            model.add_constraint(f"{prefix}cap_{i}_{j}_{t}", row, LE, 0.0)
    for inter in net.intersections:
        for c in range(1, scheme.c_max + 1):
            if cfg.pairing:
                for a, b in inter.pairing_rules:
                    model.add_constraint(
                        f"{prefix}pair_{inter.id}_{a}_{b}_{c}",
                        [(sig.green[(inter.id, a, c)], 1.0), (sig.green[(inter.id, b, c)], -1.0)],
                        EQ, 0.0,
                    )
            model.add_constraint(
                f"{prefix}sum_{inter.id}_{c}",
                [(sig.green[(inter.id, p, c)], 1.0) for p in _sum_group(inter)], LE, 1.0,
            )
    index.signal = sig
    return sig


def build_scrc(net: Network, horizon: Horizon, scheme: CycleScheme, cfg: SignalModelConfig, index, model: LinearModel):
    _check_structure(net, cfg)
    return _build_split_model(net, horizon, cfg, index, model, "g", scheme.m)


def build_csdt(net: Network, horizon: Horizon, cfg: SignalModelConfig, index, model: LinearModel):
    _check_structure(net, cfg)
    return _build_split_model(net, horizon, cfg, index, model, "w", 1)


def build_misc(net: Network, horizon: Horizon, cfg: SignalModelConfig, index, model: LinearModel):
    _check_structure(net, cfg)
    sig = SignalIndex(cfg, horizon.T, sigma=_sigma_map(net))
    for inter in net.intersections:
        for t in horizon.slots:
            for p in inter.phases:
                sig.green[(inter.id, p, t)] = model.add_var(
                    f"xi_{inter.id}_p{p}_{t}", 0.0, 1.0, integer=True
                )
    for t in horizon.slots:
        for con in net.signalized_connectors():
            i, j = con.key
            sig.kappa[(i, j, t)] = model.add_var(f"kap_{i}_{j}_{t}", 0.0, 1.0)
    for t in horizon.slots:
        for inter in net.intersections:
            model.add_constraint(
                f"one_{inter.id}_{t}", [(sig.green[(inter.id, p, t)], 1.0) for p in inter.phases], EQ, 1.0
            )
        for con in net.signalized_connectors():
            i, j = con.key
            k = sig.kappa[(i, j, t)]
            model.add_constraint(
                f"kdef_{i}_{j}_{t}",
                [(k, 1.0)] + [(sig.green[(iid, p, t)], -1.0) for iid, p in net.sigma(i, j)], EQ, 0.0,
            )
            model.add_constraint(
                f"kcap_{i}_{j}_{t}", [(index.y[(i, j, t)], 1.0), (k, -net.cell(i).Q(t))], LE, 0.0
            )
    index.signal = sig
    return sig


def build_signal(net: Network, horizon: Horizon, cfg: SignalModelConfig, index, model: LinearModel):
    if cfg.kind is SignalKind.SCRC:
        return build_scrc(net, horizon, CycleScheme(cfg.m, horizon.T), cfg, index, model)
    if cfg.kind is SignalKind.CSDT:
        return build_csdt(net, horizon, cfg, index, model)
    return build_misc(net, horizon, cfg, index, model)


# ---------------------------------------------------------------------------
# green plans


@dataclass
class GreenPlan:
    """Decoded splits keyed by (intersection, phase, k).

    ``k`` is the cycle for SCRC and the slot otherwise; MISC values are the
    phase activations.
    """

    kind: SignalKind
    T: int
    period: int
    values: dict[tuple[str, int, int], float]

    def split(self, iid: str, phase: int, t: int) -> float:
        k, _ = cycle_index(t, self.period)
        return self.values[(iid, phase, k)]

    def per_slot(self, iid: str, phase: int) -> np.ndarray:
        return np.array([self.split(iid, phase, t) for t in range(1, self.T + 1)])

    def approach_greens(self, net: Network, T: int | None = None) -> dict[str, list[float]]:
        """Effective green of every intersection cell for each slot."""
        T = self.T if T is None else T
        out = {}
        for con in net.signalized_connectors():
            phases = net.sigma(con.source, con.target)
            out[con.source] = [
                min(1.0, sum(self.split(iid, p, t) for iid, p in phases)) for t in range(1, T + 1)
            ]
        return out


def plan_violation(plan: GreenPlan, net: Network, cfg: SignalModelConfig) -> float:
    """Largest violation of the split bounds, pairings, sum group or one-phase rule."""
    worst = 0.0
    n_periods = -(-plan.T // plan.period)
    for inter in net.intersections:
        for k in range(1, n_periods + 1):
            v = {p: plan.values[(inter.id, p, k)] for p in inter.phases}
            if plan.kind is SignalKind.MISC:
                worst = max(worst, abs(sum(v.values()) - 1.0))
                worst = max(worst, *(min(abs(x), abs(x - 1.0)) for x in v.values()))
                continue
            for x in v.values():
                worst = max(worst, cfg.g_min - x, x - 1.0)
            if cfg.pairing:
                for a, b in inter.pairing_rules:
                    worst = max(worst, abs(v[a] - v[b]))
            worst = max(worst, sum(v[p] for p in _sum_group(inter)) - 1.0)
    return max(worst, 0.0)


def extract_green_plan(
    solution: Solution, cfg: SignalModelConfig, index, net: Network, tol: float = 1e-6
) -> GreenPlan:
    if solution.values is None:
        raise IntegrityError("solution carries no values")
    sig: SignalIndex = index.signal
    vals = solution.values
    if cfg.kind is SignalKind.MISC:
        raw = {k: float(vals[j]) for k, j in sig.green.items()}
        bad = [k for k, v in raw.items() if min(abs(v), abs(v - 1.0)) > tol]
        if bad:
            raise IntegrityError(f"phase activation {bad[0]} is not binary: {raw[bad[0]]}")
        values = {k: float(round(v)) for k, v in raw.items()}
    else:
        values = {k: min(1.0, max(cfg.g_min, float(vals[j]))) for k, j in sig.green.items()}
        excess = max(
            (abs(float(vals[j]) - values[k]) for k, j in sig.green.items()), default=0.0
        )
        if excess > tol:
            raise IntegrityError(f"split outside [{cfg.g_min}, 1] by {excess}")
    plan = GreenPlan(cfg.kind, index.T, cfg.period, values)
    err = plan_violation(plan, net, cfg)
    if err > tol:
        raise IntegrityError(f"decoded plan violates its structure by {err}")
    return plan


def fill_signal_values(values: np.ndarray, index, plan: GreenPlan) -> None:
    """Write a plan into a model vector (splits, and kappa for MISC)."""
    sig: SignalIndex = index.signal
    for key, j in sig.green.items():
        values[j] = plan.values[key]
    for (i, j_, t), var in sig.kappa.items():
        values[var] = sum(plan.values[(iid, p, t)] for iid, p in sig.sigma[(i, j_)])


def random_plan(
    net: Network, cfg: SignalModelConfig, T: int, rng: np.random.Generator
) -> GreenPlan:
    """Random plan satisfying the scheme's structural constraints."""
    period = cfg.period
    n = -(-T // period)
    values = {}
    for inter in net.intersections:
        group = list(_sum_group(inter))
        for k in range(1, n + 1):
            if cfg.kind is SignalKind.MISC:
                on = rng.integers(len(inter.phases))
                for q, p in enumerate(inter.phases):
                    values[(inter.id, p, k)] = 1.0 if q == on else 0.0
                continue
            spare = 1.0 - cfg.g_min * len(group)
            w = rng.dirichlet(np.ones(len(group) + 1))[: len(group)] * spare
            for p, share in zip(group, w):
                values[(inter.id, p, k)] = cfg.g_min + float(share)
            for p in inter.phases:
                values.setdefault((inter.id, p, k), cfg.g_min)
            if cfg.pairing:
                for a, b in inter.pairing_rules:
                    values[(inter.id, b, k)] = values[(inter.id, a, k)]
    return GreenPlan(cfg.kind, T, period, values)


def write_green_plan(plan: GreenPlan, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "period", "T"])
        w.writerow([plan.kind.value, plan.period, plan.T])
        w.writerow(["intersection", "phase", "index", "value"])
        for (iid, p, k), v in sorted(plan.values.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
            w.writerow([iid, p, k, repr(float(v))])


def read_green_plan(path) -> GreenPlan:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    kind, period, T = rows[1]
    values = {(r[0], int(r[1]), int(r[2])): float(r[3]) for r in rows[3:] if r}
    return GreenPlan(SignalKind(kind), int(T), int(period), values)
