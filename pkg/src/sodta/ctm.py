"""Nonlinear cell transmission model used as a feasibility oracle.

The simulator loads a network under a fixed green plan with Daganzo's
min-rule: a connector carries the minimum of what the upstream cell can
send and what the downstream cell can receive.  Two rules the LP leaves to
the optimizer are fixed here:

* diverges split by fixed turning fractions (equal split by default) with
  the FIFO rule, so a blocked branch holds back the whole diverge;
* merges share the receiving capacity in proportion to the senders'
  sending flows, summed in sorted cell-id order.

Because every realized flow is a min over the same terms that the relaxed
LP bounds separately, every trajectory produced here is feasible for the
relaxation.  :func:`relaxation_feasible` checks that from the raw arrays.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .demand import DemandProfile
from .network import CellKind, ConnectorKind, Network


class ConfigError(ValueError):
    """Missing or inconsistent simulation input."""


class ShapeError(ValueError):
    """Trajectory dimensions do not match the network or horizon."""


@dataclass
class SimState:
    t: int
    x: dict[str, float]
    sources: tuple[str, ...] = ()

    @property
    def queued_source(self) -> dict[str, float]:
        """Unserved demand waiting at each source."""
        return {s: self.x.get(s, 0.0) for s in self.sources}


@dataclass
class Trajectory:
    cells: list[str]
    connectors: list[tuple[str, str]]
    x: np.ndarray  # (T, n_cells), occupancy at the start of slot t
    y: np.ndarray  # (T, n_connectors), flow during slot t
    demand: np.ndarray | None = None  # (T, n_cells), d_i^t, zero off sources

    @property
    def T(self) -> int:
        return self.x.shape[0]

    def occupancy(self, cell: str) -> np.ndarray:
        return self.x[:, self.cells.index(cell)]

    def flow(self, source: str, target: str) -> np.ndarray:
        return self.y[:, self.connectors.index((source, target))]


def sending(net: Network, cell: str, x: float, t: int = 1, green: float = 1.0) -> float:
    c = net.cell(cell)
    if c.kind is CellKind.SINK:
        return 0.0
    return min(x, green * c.Q(t))


def receiving(net: Network, cell: str, x: float, t: int = 1) -> float:
    c = net.cell(cell)
    if c.kind is CellKind.SINK:
        return math.inf
    if c.kind is CellKind.SOURCE:
        return 0.0
    return min(c.Q(t), c.delta * (c.N(t) - x))


class _Loader:
    """Precomputed connector groups for one network."""

    def __init__(self, net: Network, turning: Mapping[tuple[str, str], float] | None):
        self.net = net
        self.cells = [c.id for c in net.cells]
        self.cix = {cid: k for k, cid in enumerate(self.cells)}
        self.keys = [c.key for c in net.connectors]
        self.eix = {key: k for k, key in enumerate(self.keys)}
        self.approaches = [c.id for c in net.cells_of_kind(CellKind.INTERSECTION)]
        self.sources = [c.id for c in net.sources]
        self.incoming = {cid: [self.eix[(p, cid)] for p in net.predecessors(cid)] for cid in self.cells}
        self.outgoing = {cid: [self.eix[(cid, s)] for s in net.successors(cid)] for cid in self.cells}

        turning = dict(turning or {})
        self.diverges: list[tuple[str, list[tuple[int, str, float]]]] = []
        self.groups: list[tuple[str, list[tuple[int, str]]]] = []
        for cid in self.cells:
            succ = net.successors(cid)
            if len(succ) > 1:
                fr = [turning.get((cid, s), 1.0 / len(succ)) for s in succ]
                if any(f < 0 for f in fr) or not math.isclose(sum(fr), 1.0, abs_tol=1e-12):
                    raise ConfigError(f"turning fractions at {cid} must be nonnegative and sum to 1")
                self.diverges.append((cid, [(self.eix[(cid, s)], s, f) for s, f in zip(succ, fr)]))
        for cid in self.cells:
            senders = sorted(
                (p for p in net.predecessors(cid) if len(net.successors(p)) == 1), key=_id_order
            )
            if senders:
                self.groups.append((cid, [(self.eix[(p, cid)], p) for p in senders]))


def _id_order(cid: str):
    return (0, int(cid), "") if cid.isdigit() else (1, 0, cid)


def _green_lookup(greens, loader: _Loader, T: int) -> dict[str, Sequence[float]]:
    if greens is None:
        greens = {}
    elif hasattr(greens, "approach_greens"):
        greens = greens.approach_greens(loader.net, T)
    out = {}
    for a in loader.approaches:
        if a not in greens:
            raise ConfigError(f"no green split given for approach cell {a}")
        vec = greens[a]
        if len(vec) < T:
            raise ConfigError(f"green split for {a} covers {len(vec)} of {T} slots")
        out[a] = vec
    return out


def _step(loader: _Loader, t: int, x: Sequence[float], green: Mapping[str, float], d: Sequence[float]):
    net = loader.net
    S = {}
    R = {}
    for cid in loader.cells:
        k = loader.cix[cid]
        S[cid] = sending(net, cid, x[k], t, green.get(cid, 1.0))
        R[cid] = receiving(net, cid, x[k], t)
    y = [0.0] * len(loader.keys)
    for cid, branches in loader.diverges:
        total = S[cid]
        for _, s, f in branches:
            if f > 0:
                total = min(total, R[s] / f)
        for e, _, f in branches:
            y[e] = f * total
    for cid, senders in loader.groups:
        demand = sum(S[p] for _, p in senders)
        if demand <= R[cid]:
            for e, p in senders:
                y[e] = S[p]
        else:
            for e, p in senders:
                y[e] = R[cid] * (S[p] / demand)
    return y, _balance(loader, x, y, d)


def _balance(loader: _Loader, x, y, d) -> list[float]:
    """x^{t+1} from x^t, flows and demand; fixed summation order."""
    nxt = []
    for cid in loader.cells:
        k = loader.cix[cid]
        inflow = sum(y[e] for e in loader.incoming[cid])
        outflow = sum(y[e] for e in loader.outgoing[cid])
        nxt.append(x[k] + inflow - outflow + d[k])
    return nxt


def step(
    net: Network,
    state: SimState,
    greens: Mapping[str, float],
    demand: DemandProfile,
    turning: Mapping[tuple[str, str], float] | None = None,
) -> tuple[SimState, dict[tuple[str, str], float]]:
    """Advance one slot.  Returns the next state and the flows of slot ``state.t``."""
    loader = _Loader(net, turning)
    for a in loader.approaches:
        if a not in greens:
            raise ConfigError(f"no green split given for approach cell {a}")
    x = [state.x.get(cid, 0.0) for cid in loader.cells]
    d = [_demand(demand, cid, state.t) for cid in loader.cells]
    y, nxt = _step(loader, state.t, x, greens, d)
    nxt_state = SimState(state.t + 1, dict(zip(loader.cells, nxt)), tuple(loader.sources))
    return nxt_state, dict(zip(loader.keys, y))


def _demand(demand: DemandProfile, cid: str, t: int) -> float:
    vec = demand.entries.get(cid)
    return 0.0 if vec is None or t > len(vec) else vec[t - 1]


def simulate(
    net: Network,
    demand: DemandProfile,
    greens=None,
    T: int | None = None,
    turning: Mapping[tuple[str, str], float] | None = None,
) -> Trajectory:
    """Run the CTM for ``T`` slots from an empty network.

    ``greens`` maps each intersection cell to a per-slot effective split
    (or is any object with an ``approach_greens(net, T)`` method, such as a
    decoded green plan).  ``None`` is accepted only for unsignalized
    networks.
    """
    T = demand.T if T is None else T
    loader = _Loader(net, turning)
    green_vecs = _green_lookup(greens, loader, T)
    n, m = len(loader.cells), len(loader.keys)
    X = np.zeros((T, n))
    Y = np.zeros((T, m))
    D = np.zeros((T, n))
    for cid in loader.sources:
        D[:, loader.cix[cid]] = [_demand(demand, cid, t) for t in range(1, T + 1)]
    x = [0.0] * n
    for t in range(1, T + 1):
        X[t - 1] = x
        g = {a: float(v[t - 1]) for a, v in green_vecs.items()}
        y, x = _step(loader, t, x, g, D[t - 1].tolist())
        Y[t - 1] = y
    return Trajectory(loader.cells, loader.keys, X, Y, D)


def conservation_residual(traj: Trajectory, net: Network) -> float:
    """Largest |x^{t+1} - (x^t + in - out + d)| over cells and slots 1..T-1."""
    loader = _Loader(net, None)
    _check_shape(traj, loader)
    D = traj.demand if traj.demand is not None else np.zeros_like(traj.x)
    worst = 0.0
    for t in range(traj.T - 1):
        expect = _balance(loader, traj.x[t].tolist(), traj.y[t].tolist(), D[t].tolist())
        worst = max(worst, float(np.max(np.abs(traj.x[t + 1] - np.asarray(expect)))))
    return worst


def occupancy_violation(traj: Trajectory, net: Network) -> float:
    """Largest excursion of road-cell occupancy outside [0, N]."""
    worst = 0.0
    for k, cid in enumerate(traj.cells):
        c = net.cell(cid)
        col = traj.x[:, k]
        worst = max(worst, float(np.max(-col, initial=0.0)))
        if c.is_road:
            caps = np.array([c.N(t) for t in range(1, traj.T + 1)])
            worst = max(worst, float(np.max(col - caps, initial=0.0)))
    return worst


def _check_shape(traj: Trajectory, loader: _Loader) -> None:
    if traj.cells != loader.cells or [tuple(k) for k in traj.connectors] != loader.keys:
        raise ShapeError("trajectory cell/connector layout does not match the network")
    if traj.y.shape != (traj.T, len(loader.keys)) or traj.x.shape != (traj.T, len(loader.cells)):
        raise ShapeError(f"trajectory arrays have shapes {traj.x.shape}, {traj.y.shape}")


def relaxation_violations(
    traj: Trajectory, net: Network, tol: float = 1e-9, greens: Mapping[str, Sequence[float]] | None = None
) -> list[tuple[str, int, str, float]]:
    """Every relaxed-CTM inequality violated by more than ``tol``.

    Families: ``eq5`` sender bounds on source/ordinary connectors, ``eq6``
    receiving bounds on source/ordinary/diverge connectors, ``eq7`` diverge
    totals, ``eq8`` sender bounds on merge/sink connectors, ``eq9`` merge
    receiving totals.  With ``greens`` the signal caps y <= g*Q on
    intersection cells are checked as well.  Entries are (family, slot,
    item, excess).
    """
    loader = _Loader(net, None)
    _check_shape(traj, loader)
    out = []

    def chk(fam, t, item, lhs, rhs):
        if lhs - rhs > tol:
            out.append((fam, t, item, lhs - rhs))

    for t in range(1, traj.T + 1):
        x = dict(zip(loader.cells, traj.x[t - 1]))
        y = dict(zip(loader.keys, traj.y[t - 1]))
        for key, v in y.items():
            if v < -tol:
                out.append(("nonneg", t, f"{key[0]}>{key[1]}", -v))
        for con in net.connectors:
            i, j = con.key
            ci, cj = net.cell(i), net.cell(j)
            v = y[con.key]
            name = f"{i}>{j}"
            if con.kind in (ConnectorKind.SOURCE, ConnectorKind.ORDINARY):
                chk("eq5", t, name, v, x[i])
                chk("eq5", t, name, v, ci.Q(t))
            if con.kind in (ConnectorKind.SOURCE, ConnectorKind.ORDINARY, ConnectorKind.DIVERGE):
                chk("eq6", t, name, v, cj.Q(t))
                chk("eq6", t, name, v, cj.delta * (cj.N(t) - x[j]))
            if con.kind in (ConnectorKind.MERGE, ConnectorKind.SINK, ConnectorKind.INTERSECTION_MERGE):
                chk("eq8", t, name, v, ci.Q(t))
                chk("eq8", t, name, v, x[i])
            if greens is not None and ci.kind is CellKind.INTERSECTION:
                chk("signal", t, name, v, greens[i][t - 1] * ci.Q(t))
        for c in net.cells:
            outs = net.successors(c.id)
            if len(outs) > 1:
                total = sum(y[(c.id, s)] for s in outs)
                chk("eq7", t, c.id, total, x[c.id])
                chk("eq7", t, c.id, total, c.Q(t))
            if c.kind is not CellKind.SINK:
                ins = [
                    p for p in net.predecessors(c.id)
                    if net.connector(p, c.id).kind
                    in (ConnectorKind.MERGE, ConnectorKind.INTERSECTION_MERGE)
                ]
                if ins:
                    total = sum(y[(p, c.id)] for p in ins)
                    chk("eq9", t, c.id, total, c.delta * (c.N(t) - x[c.id]))
                    chk("eq9", t, c.id, total, c.Q(t))
    return out


def relaxation_feasible(traj: Trajectory, net: Network, tol: float = 1e-9, greens=None) -> bool:
    return not relaxation_violations(traj, net, tol, greens)


def write_trajectory(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "var", "from", "to", "value"])
        for t in range(traj.T):
            for k, cid in enumerate(traj.cells):
                w.writerow([t + 1, "x", cid, "", repr(float(traj.x[t, k]))])
            for k, (a, b) in enumerate(traj.connectors):
                w.writerow([t + 1, "y", a, b, repr(float(traj.y[t, k]))])
