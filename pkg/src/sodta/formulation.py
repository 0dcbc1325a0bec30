"""System-optimal DTA model: conservation, relaxed CTM flow limits, objectives.

Variables
    ``x_<cell>_<t>``  occupancy at the start of slot t (all cells, t = 1..T)
    ``y_<i>_<j>_<t>`` flow on connector (i, j) during slot t

Row families (name prefixes)
    ``init``        x^1 = 0
    ``cons``        x^{t+1} = x^t + inflow - outflow (+ demand at sources)
    ``eq5x/eq5q``   y <= x_i, y <= Q_i on source and ordinary connectors
    ``eq6q/eq6n``   y <= Q_j, y <= delta_j (N_j - x_j) on source, ordinary
                    and diverge connectors
    ``eq7x/eq7q``   sum of diverge outflows <= x_i and <= Q_i
    ``eq8q/eq8x``   y <= Q_k, y <= x_k on merge, sink and intersection-merge
                    connectors
    ``eq9n/eq9q``   sum of merge inflows <= delta_i (N_i - x_i) and <= Q_i

Sources and the sink have unbounded storage, so no receiving row is
generated for them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .demand import DemandProfile, Horizon
from .lp.model import EQ, LE, LinearModel
from .network import CellKind, ConnectorKind, Network, derive_connector_kind, validate_network


class FormulationError(ValueError):
    pass


class ObjectiveKind(str, enum.Enum):
    SO = "SO"
    FLOW_BENEFIT = "flow_benefit"
    DCS = "DCS"


@dataclass(frozen=True)
class ObjectiveConfig:
    kind: ObjectiveKind = ObjectiveKind.SO
    alpha: float | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", ObjectiveKind(self.kind))
        except ValueError:
            raise FormulationError(f"unknown objective kind {self.kind!r}") from None
        if self.alpha is not None and not self.alpha > 0 and self.kind is ObjectiveKind.FLOW_BENEFIT:
            raise FormulationError("flow-benefit weight alpha must be positive")


def default_alpha(T: int, total_demand: float) -> float:
    """1 / (T * total demand); 1/T when there is no demand."""
    return 1.0 / (T * total_demand) if total_demand > 0 else 1.0 / T


@dataclass
class FormulationIndex:
    T: int
    cells: list[str]
    connectors: list[tuple[str, str]]
    x: dict[tuple[str, int], int] = field(default_factory=dict)
    y: dict[tuple[str, str, int], int] = field(default_factory=dict)
    signal: object | None = None
    alpha: float | None = None

    def x_array(self, values: Sequence[float]) -> np.ndarray:
        """(T, n_cells) occupancy matrix from a solution vector."""
        v = np.asarray(values)
        return np.array([[v[self.x[(c, t)]] for c in self.cells] for t in range(1, self.T + 1)])

    def y_array(self, values: Sequence[float]) -> np.ndarray:
        v = np.asarray(values)
        return np.array(
            [[v[self.y[(a, b, t)]] for a, b in self.connectors] for t in range(1, self.T + 1)]
        )

    def var_of(self, key) -> int:
        return self.x[key] if len(key) == 2 else self.y[key]

    def key_of(self, var: int):
        if not hasattr(self, "_rev"):
            self._rev = {v: k for k, v in self.x.items()} | {v: k for k, v in self.y.items()}
        return self._rev[var]


def build_variables(net: Network, horizon: Horizon, model: LinearModel) -> FormulationIndex:
    index = FormulationIndex(horizon.T, [c.id for c in net.cells], [c.key for c in net.connectors])
    for t in horizon.slots:
        for c in net.cells:
            index.x[(c.id, t)] = model.add_var(f"x_{c.id}_{t}")
    for t in horizon.slots:
        for a, b in index.connectors:
            index.y[(a, b, t)] = model.add_var(f"y_{a}_{b}_{t}")
    return index


def build_conservation(
    net: Network, demand: DemandProfile, horizon: Horizon, index: FormulationIndex, model: LinearModel
) -> None:
    if len(index.x) != len(net.cells) * horizon.T or len(index.y) != len(net.connectors) * horizon.T:
        raise FormulationError("formulation index does not cover every cell/connector and slot")
    for c in net.cells:
        model.add_constraint(f"init_{c.id}", [(index.x[(c.id, 1)], 1.0)], EQ, 0.0)
    for t in range(1, horizon.T):
        for c in net.cells:
            row = [(index.x[(c.id, t + 1)], 1.0), (index.x[(c.id, t)], -1.0)]
            row += [(index.y[(p, c.id, t)], -1.0) for p in net.predecessors(c.id)]
            row += [(index.y[(c.id, s, t)], 1.0) for s in net.successors(c.id)]
            rhs = 0.0
            if c.kind is CellKind.SOURCE:
                vec = demand.entries.get(c.id)
                rhs = 0.0 if vec is None else vec[t - 1]
            model.add_constraint(f"cons_{c.id}_{t}", row, EQ, rhs)


def build_relaxation(net: Network, horizon: Horizon, index: FormulationIndex, model: LinearModel) -> None:
    R, O, D = ConnectorKind.SOURCE, ConnectorKind.ORDINARY, ConnectorKind.DIVERGE
    MERGE_LIKE = (ConnectorKind.MERGE, ConnectorKind.SINK, ConnectorKind.INTERSECTION_MERGE)
    for con in net.connectors:
        try:
            derived = derive_connector_kind(net, con.source, con.target)
        except KeyError as exc:
            raise FormulationError(f"connector {con.source}->{con.target}: {exc}") from None
        if derived is not con.kind:
            raise FormulationError(
                f"connector {con.source}->{con.target} is stored as {con.kind.value} "
                f"but its endpoints make it {derived.value}"
            )

    diverges = [c for c in net.cells if len(net.successors(c.id)) > 1]
    merge_targets = [
        c for c in net.cells
        if c.kind is not CellKind.SINK
        and any(
            net.connector(p, c.id).kind in (ConnectorKind.MERGE, ConnectorKind.INTERSECTION_MERGE)
            for p in net.predecessors(c.id)
        )
    ]
    for t in horizon.slots:
        for con in net.connectors:
            i, j = con.key
            ci, cj = net.cell(i), net.cell(j)
            y = index.y[(i, j, t)]
            tag = f"{i}_{j}_{t}"
            if con.kind in (R, O):
                model.add_constraint(f"eq5x_{tag}", [(y, 1.0), (index.x[(i, t)], -1.0)], LE, 0.0)
                model.add_constraint(f"eq5q_{tag}", [(y, 1.0)], LE, ci.Q(t))
            if con.kind in (R, O, D):
                model.add_constraint(f"eq6q_{tag}", [(y, 1.0)], LE, cj.Q(t))
                model.add_constraint(
                    f"eq6n_{tag}", [(y, 1.0), (index.x[(j, t)], cj.delta)], LE, cj.delta * cj.N(t)
                )
            if con.kind in MERGE_LIKE:
                model.add_constraint(f"eq8q_{tag}", [(y, 1.0)], LE, ci.Q(t))
                model.add_constraint(f"eq8x_{tag}", [(y, 1.0), (index.x[(i, t)], -1.0)], LE, 0.0)
        for c in diverges:
            ys = [(index.y[(c.id, s, t)], 1.0) for s in net.successors(c.id)]
            model.add_constraint(f"eq7x_{c.id}_{t}", ys + [(index.x[(c.id, t)], -1.0)], LE, 0.0)
            model.add_constraint(f"eq7q_{c.id}_{t}", ys, LE, c.Q(t))
        for c in merge_targets:
            ys = [(index.y[(p, c.id, t)], 1.0) for p in net.predecessors(c.id)]
            model.add_constraint(
                f"eq9n_{c.id}_{t}", ys + [(index.x[(c.id, t)], c.delta)], LE, c.delta * c.N(t)
            )
            model.add_constraint(f"eq9q_{c.id}_{t}", ys, LE, c.Q(t))


def build_objective(
    cfg: ObjectiveConfig, index: FormulationIndex, horizon: Horizon, net: Network
) -> dict[int, float]:
    """Objective coefficients keyed by variable index."""
    kind = ObjectiveKind(cfg.kind)
    T = horizon.T
    coef: dict[int, float] = {}
    for c in net.cells:
        if c.kind is CellKind.SINK:
            continue
        w = 2.0 if kind is ObjectiveKind.DCS and c.kind is CellKind.SOURCE else 1.0
        for t in horizon.slots:
            coef[index.x[(c.id, t)]] = w
    if kind is ObjectiveKind.FLOW_BENEFIT:
        alpha = cfg.alpha if cfg.alpha is not None else index.alpha
        if alpha is None:
            raise FormulationError("flow-benefit objective needs alpha")
        for (a, b, t), j in index.y.items():
            coef[j] = coef.get(j, 0.0) - alpha * (T + 1 - t)
    return coef


def assemble(
    net: Network,
    demand: DemandProfile,
    horizon: Horizon,
    objective: ObjectiveConfig | None = None,
    signal=None,
    name: str | None = None,
) -> tuple[LinearModel, FormulationIndex]:
    """Full model: conservation + relaxation + objective + signal rows.

    ``signal`` is a :class:`sodta.signals.SignalModelConfig` or ``None``
    for an unsignalized formulation.
    """
    report = validate_network(net)
    if not report.ok:
        raise FormulationError("invalid network: " + "; ".join(report.diagnostics))
    if demand.T < horizon.T:
        raise FormulationError(f"demand covers {demand.T} slots, horizon needs {horizon.T}")
    demand.check_sources(net)
    objective = objective or ObjectiveConfig()
    label = signal.label if signal is not None else "nosignal"
    model = LinearModel(name=name or f"{net.name}-{label}-{ObjectiveKind(objective.kind).value}")
    index = build_variables(net, horizon, model)
    if objective.kind is ObjectiveKind.FLOW_BENEFIT:
        index.alpha = (
            objective.alpha if objective.alpha is not None else default_alpha(horizon.T, demand.total())
        )
    build_conservation(net, demand, horizon, index, model)
    build_relaxation(net, horizon, index, model)
    if signal is not None:
        from .signals import build_signal

        build_signal(net, horizon, signal, index, model)
    for j, a in build_objective(objective, index, horizon, net).items():
        model.add_objective(j, a)
    return model, index


def point_from_trajectory(model: LinearModel, index: FormulationIndex, traj, plan=None) -> np.ndarray:
    """Model variable vector holding a simulated trajectory (and its green plan)."""
    values = np.zeros(model.n_vars)
    if traj.cells != index.cells or list(traj.connectors) != index.connectors or traj.T < index.T:
        raise FormulationError("trajectory layout does not match the formulation")
    for (c, t), j in index.x.items():
        values[j] = traj.x[t - 1, index.cells.index(c)]
    cix = {key: k for k, key in enumerate(index.connectors)}
    for (a, b, t), j in index.y.items():
        values[j] = traj.y[t - 1, cix[(a, b)]]
    if plan is not None and index.signal is not None:
        from .signals import fill_signal_values

        fill_signal_values(values, index, plan)
    return values
