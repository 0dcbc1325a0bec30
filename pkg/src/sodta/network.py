"""Cell-based network representation for single-destination CTM models.

A network is a set of cells joined by directed connectors.  Cells carry the
CTM parameters (capacity ``Q``, jam capacity ``N``, backward ratio ``delta``)
and a kind.  Connectors are classified into the partitions that decide which
relaxed flow constraints apply to them.  Signalized intersections own a list
of phases, each phase a set of movements out of intersection cells.
"""

from __future__ import annotations

import enum
import math
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

_ID_RE = re.compile(r"^[A-Za-z0-9]+$")


class CellKind(str, enum.Enum):
    SOURCE = "source"
    SINK = "sink"
    ORDINARY = "ordinary"
    MERGE = "merge"
    DIVERGE = "diverge"
    INTERSECTION = "intersection"


class ConnectorKind(str, enum.Enum):
    SOURCE = "R"
    ORDINARY = "O"
    MERGE = "M"
    DIVERGE = "D"
    SINK = "S"
    INTERSECTION_MERGE = "IM"


class NotFoundError(KeyError):
    """Raised when a cell or connector id is not part of the network."""


@dataclass(frozen=True)
class Cell:
    id: str
    kind: CellKind
    length: float
    free_flow_speed: float
    delta: float
    capacity: float
    jam_capacity: float
    intersection: str | None = None
    # optional per-slot overrides, slot 1 at index 0
    capacity_profile: tuple[float, ...] | None = None
    jam_profile: tuple[float, ...] | None = None

    def Q(self, t: int) -> float:
        """Capacity at 1-based slot ``t``."""
        if self.capacity_profile is not None:
            return self.capacity_profile[t - 1]
        return self.capacity

    def N(self, t: int) -> float:
        """Jam capacity at 1-based slot ``t``; infinite for sources and the sink."""
        if self.kind in (CellKind.SOURCE, CellKind.SINK):
            return math.inf
        if self.jam_profile is not None:
            return self.jam_profile[t - 1]
        return self.jam_capacity

    @property
    def is_road(self) -> bool:
        return self.kind not in (CellKind.SOURCE, CellKind.SINK)


@dataclass(frozen=True)
class Connector:
    source: str
    target: str
    kind: ConnectorKind

    @property
    def key(self) -> tuple[str, str]:
        return (self.source, self.target)


@dataclass(frozen=True)
class Phase:
    id: int
    intersection: str
    movements: frozenset[tuple[str, str]]


@dataclass(frozen=True)
class Intersection:
    id: str
    phases: tuple[int, ...]
    pairing_rules: tuple[tuple[int, int], ...] = ()
    group_for_sum: tuple[int, ...] = ()


@dataclass
class ValidationReport:
    diagnostics: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.diagnostics

    def __bool__(self) -> bool:
        return self.ok


NEMA_PAIRS = ((1, 5), (2, 6), (3, 7), (4, 8), (2, 9), (4, 10), (6, 11), (8, 12))
NEMA_SUM_GROUP = (1, 2, 3, 4)


class Network:
    """Immutable cell network with cached adjacency.

    Construction does not validate; call :func:`validate_network` before
    handing the network to the formulator or the simulator.
    """

    def __init__(
        self,
        cells: Iterable[Cell],
        connectors: Iterable[Connector],
        intersections: Iterable[Intersection] = (),
        phases: Iterable[Phase] = (),
        conflicts: Iterable[tuple[str, str]] = (),
        name: str = "network",
    ):
        self.name = name
        self.cells: tuple[Cell, ...] = tuple(cells)
        self.connectors: tuple[Connector, ...] = tuple(connectors)
        self.intersections: tuple[Intersection, ...] = tuple(intersections)
        self.phases: tuple[Phase, ...] = tuple(phases)
        self.conflicts: tuple[tuple[str, str], ...] = tuple(tuple(c) for c in conflicts)

        self._cells = {c.id: c for c in self.cells}
        self._connectors = {c.key: c for c in self.connectors}
        self._intersections = {i.id: i for i in self.intersections}
        self._phases = {(p.intersection, p.id): p for p in self.phases}
        self._succ: dict[str, list[str]] = {c.id: [] for c in self.cells}
        self._pred: dict[str, list[str]] = {c.id: [] for c in self.cells}
        for con in self.connectors:
            self._succ.setdefault(con.source, []).append(con.target)
            self._pred.setdefault(con.target, []).append(con.source)

    # lookups -------------------------------------------------------------
    def cell(self, cid: str) -> Cell:
        try:
            return self._cells[cid]
        except KeyError:
            raise NotFoundError(f"unknown cell {cid!r}") from None

    def connector(self, source: str, target: str) -> Connector:
        try:
            return self._connectors[(source, target)]
        except KeyError:
            raise NotFoundError(f"unknown connector {source}->{target}") from None

    def intersection(self, iid: str) -> Intersection:
        try:
            return self._intersections[iid]
        except KeyError:
            raise NotFoundError(f"unknown intersection {iid!r}") from None

    def phase(self, iid: str, pid: int) -> Phase:
        try:
            return self._phases[(iid, pid)]
        except KeyError:
            raise NotFoundError(f"unknown phase {pid} at {iid!r}") from None

    def successors(self, cid: str) -> list[str]:
        """Gamma(i)."""
        return list(self._succ.get(cid, ()))

    def predecessors(self, cid: str) -> list[str]:
        """Gamma^-1(i)."""
        return list(self._pred.get(cid, ()))

    def cells_of_kind(self, *kinds: CellKind) -> list[Cell]:
        return [c for c in self.cells if c.kind in kinds]

    @property
    def sources(self) -> list[Cell]:
        return self.cells_of_kind(CellKind.SOURCE)

    @property
    def sinks(self) -> list[Cell]:
        return self.cells_of_kind(CellKind.SINK)

    def phases_of(self, iid: str) -> list[Phase]:
        inter = self.intersection(iid)
        return [self._phases[(iid, p)] for p in inter.phases if (iid, p) in self._phases]

    def sigma(self, source: str, target: str) -> list[tuple[str, int]]:
        """Phases (intersection, phase id) whose movement set contains the connector."""
        return [
            (p.intersection, p.id) for p in self.phases if (source, target) in p.movements
        ]

    def signalized_connectors(self) -> list[Connector]:
        """Connectors leaving intersection cells, in connector order."""
        return [
            c for c in self.connectors if self._cells[c.source].kind is CellKind.INTERSECTION
        ]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return (
            self.name == other.name
            and self.cells == other.cells
            and self.connectors == other.connectors
            and self.intersections == other.intersections
            and self.phases == other.phases
            and self.conflicts == other.conflicts
        )

    def __repr__(self) -> str:
        return (
            f"Network({self.name!r}, cells={len(self.cells)}, "
            f"connectors={len(self.connectors)}, intersections={len(self.intersections)})"
        )


def derive_connector_kind(net: Network, source: str, target: str) -> ConnectorKind:
    """Connector partition implied by the endpoint kinds and fan-in/fan-out."""
    a, b = net.cell(source), net.cell(target)
    if a.kind is CellKind.INTERSECTION:
        return ConnectorKind.INTERSECTION_MERGE
    if b.kind is CellKind.SINK:
        return ConnectorKind.SINK
    if len(net.successors(source)) > 1:
        return ConnectorKind.DIVERGE
    if len(net.predecessors(target)) > 1:
        return ConnectorKind.MERGE
    if a.kind is CellKind.SOURCE:
        return ConnectorKind.SOURCE
    return ConnectorKind.ORDINARY


def classify_connector(net: Network, source: str, target: str) -> ConnectorKind:
    """Return the stored partition of a declared connector."""
    return net.connector(source, target).kind


def make_connectors(net_cells: Sequence[Cell], pairs: Sequence[tuple[str, str]]) -> list[Connector]:
    """Build connectors with derived kinds from bare (from, to) pairs."""
    probe = Network(net_cells, [Connector(a, b, ConnectorKind.ORDINARY) for a, b in pairs])
    return [Connector(a, b, derive_connector_kind(probe, a, b)) for a, b in pairs]


def validate_network(net: Network) -> ValidationReport:
    report = ValidationReport()
    diag = report.diagnostics.append

    seen: set[str] = set()
    for c in net.cells:
        if c.id in seen:
            diag(f"duplicate cell id {c.id}")
        seen.add(c.id)
        if not _ID_RE.match(c.id):
            diag(f"cell id {c.id!r} must be alphanumeric")
        if c.capacity < 0 or (c.capacity_profile and min(c.capacity_profile) < 0):
            diag(f"cell {c.id}: negative capacity")
        if c.jam_capacity < 0 or (c.jam_profile and min(c.jam_profile) < 0):
            diag(f"cell {c.id}: negative jam capacity")
        if not 0 < c.delta <= 1:
            diag(f"cell {c.id}: delta must lie in (0, 1]")
        if not c.free_flow_speed > 0:
            diag(f"cell {c.id}: free-flow speed must be positive")
        if not c.length > 0:
            diag(f"cell {c.id}: length must be positive")
        if c.kind is CellKind.INTERSECTION:
            if c.intersection is None:
                diag(f"intersection cell {c.id} has no intersection")
            elif c.intersection not in net._intersections:
                diag(f"intersection cell {c.id} refers to unknown intersection {c.intersection}")
        elif c.intersection is not None:
            diag(f"cell {c.id} is not an intersection cell but names intersection {c.intersection}")

    keys: set[tuple[str, str]] = set()
    for con in net.connectors:
        if con.key in keys:
            diag(f"duplicate connector {con.source}->{con.target}")
        keys.add(con.key)
        if con.source == con.target:
            diag(f"self-loop on {con.source}")
        missing = [x for x in con.key if x not in net._cells]
        if missing:
            diag(f"connector {con.source}->{con.target} references unknown cell {missing[0]}")
    if report.diagnostics:
        return report

    for c in net.cells:
        n_in, n_out = len(net.predecessors(c.id)), len(net.successors(c.id))
        if c.kind is CellKind.SOURCE:
            if n_in:
                diag(f"source has predecessor: {c.id}")
            if n_out != 1:
                diag(f"source {c.id} must have exactly one successor")
        elif c.kind is CellKind.SINK:
            if n_out:
                diag(f"sink has successor: {c.id}")
            if n_in == 0:
                diag(f"sink {c.id} has no predecessor")
        else:
            if n_in == 0:
                diag(f"{c.kind.value} cell {c.id} has no predecessor")
            if n_out == 0:
                diag(f"{c.kind.value} cell {c.id} has no successor")
            if c.kind is CellKind.ORDINARY and (n_in > 1 or n_out > 1):
                diag(f"ordinary cell {c.id} must have one predecessor and one successor")
            if c.kind is CellKind.MERGE and (n_in < 2 or n_out > 1):
                diag(f"merge cell {c.id} needs several predecessors and one successor")
            if c.kind is CellKind.DIVERGE and (n_in > 1 or n_out < 2):
                diag(f"diverge cell {c.id} needs one predecessor and several successors")
            if c.kind is CellKind.INTERSECTION and n_out > 1:
                diag(f"intersection cell {c.id} must have one successor")
    if len(net.sinks) != 1:
        diag(f"expected exactly one sink, found {len(net.sinks)}")
    if not net.sources:
        diag("network has no source")

    for con in net.connectors:
        derived = derive_connector_kind(net, con.source, con.target)
        if derived is not con.kind:
            diag(
                f"connector {con.source}->{con.target} stored as {con.kind.value}, "
                f"derived {derived.value}"
            )
        if len(net.successors(con.source)) > 1 and len(net.predecessors(con.target)) > 1:
            diag(f"connector {con.source}->{con.target} joins a diverge to a merge")

    _check_reachability(net, diag)
    _check_signals(net, diag)
    return report


def _check_reachability(net: Network, diag) -> None:
    reached: set[str] = set()
    queue = deque(c.id for c in net.sources)
    while queue:
        cid = queue.popleft()
        if cid in reached:
            continue
        reached.add(cid)
        queue.extend(net.successors(cid))
    for c in net.cells:
        if c.kind is not CellKind.SOURCE and c.id not in reached:
            diag(f"cell {c.id} is unreachable from every source")

    back: set[str] = set()
    queue = deque(c.id for c in net.sinks)
    while queue:
        cid = queue.popleft()
        if cid in back:
            continue
        back.add(cid)
        queue.extend(net.predecessors(cid))
    for c in net.cells:
        if c.kind is not CellKind.SINK and c.id not in back:
            diag(f"cell {c.id} does not reach the sink")


def _check_signals(net: Network, diag) -> None:
    for inter in net.intersections:
        for a, b in inter.pairing_rules:
            for p in (a, b):
                if p not in inter.phases:
                    diag(f"intersection {inter.id}: pairing refers to missing phase {p}")
        for p in inter.group_for_sum:
            if p not in inter.phases:
                diag(f"intersection {inter.id}: sum group refers to missing phase {p}")
        for p in inter.phases:
            if (inter.id, p) not in net._phases:
                diag(f"intersection {inter.id}: phase {p} has no movement set")

    served: dict[str, int] = {}
    conflicts = {frozenset(c) for c in net.conflicts}
    for ph in net.phases:
        if ph.intersection not in net._intersections:
            diag(f"phase {ph.id} refers to unknown intersection {ph.intersection}")
            continue
        for a, b in ph.movements:
            if (a, b) not in net._connectors:
                diag(f"phase {ph.id} at {ph.intersection}: movement {a}->{b} is not a connector")
                continue
            cell = net._cells[a]
            if cell.kind is not CellKind.INTERSECTION or cell.intersection != ph.intersection:
                diag(f"phase {ph.id} at {ph.intersection}: {a} is not one of its approach cells")
            served[a] = served.get(a, 0) + 1
        cells = sorted(a for a, _ in ph.movements)
        for i, a in enumerate(cells):
            for b in cells[i + 1 :]:
                if frozenset((a, b)) in conflicts:
                    diag(f"phase {ph.id} at {ph.intersection}: movements {a} and {b} conflict")
    for c in net.cells_of_kind(CellKind.INTERSECTION):
        if served.get(c.id, 0) != 1:
            diag(f"intersection cell {c.id} is served by {served.get(c.id, 0)} phases, expected 1")
    for a, b in net.conflicts:
        for x in (a, b):
            if x not in net._cells or net._cells[x].kind is not CellKind.INTERSECTION:
                diag(f"conflict pair ({a}, {b}) names non-intersection cell {x}")


# ---------------------------------------------------------------------------
# bundled networks

CELL_LENGTH = 152.4  # m
FREE_FLOW_SPEED = 15.24  # m/s
SLOT_SECONDS = 10.0


def _road(cid, kind, q, n, inter=None):
    return Cell(cid, kind, CELL_LENGTH, FREE_FLOW_SPEED, 0.5, q, n, inter)


def build_paper_network() -> Network:
    """Two-intersection, 35-cell reconstruction of the experiment network.

    Link-level layout (node ids in brackets)::

        R1 -> 1 -> 2 [2] --(3,4,8,9)-----> I1 [3] --(16,17,18,19)--> I2 [4]
                     \\--(10,12,15)-------------------------------> I2 [4]
        R2 -> 5 -> 6 -> 7 -> 13 -> 14 ---> I1 [3]
        I1 --(20,21,22)--\\
        I2 --(23)---------> 11 -> S
        I2 --(24)--------/

    Approach cells ``1xx`` carry the through movement and ``2xx`` the right
    turn of the same approach.  Phase 1 serves 102/202 at I1 and 109/209 at
    I2, phase 2 serves 104/204 and 107/207.  The cell-level adjacency of the
    original figure is not recoverable, so this wiring is a reconstruction
    that keeps the stated counts, ids and capacities.
    """
    O, M, D, X = CellKind.ORDINARY, CellKind.MERGE, CellKind.DIVERGE, CellKind.INTERSECTION
    big = {"1", "2", "5", "6", "7", "11"}

    def road(cid, kind, inter=None):
        q, n = (12.0, 36.0) if cid in big else (6.0, 18.0)
        return _road(cid, kind, q, n, inter)

    cells = [
        Cell("R1", CellKind.SOURCE, CELL_LENGTH, FREE_FLOW_SPEED, 0.5, 12.0, 1.0),
        Cell("R2", CellKind.SOURCE, CELL_LENGTH, FREE_FLOW_SPEED, 0.5, 12.0, 1.0),
        road("1", O), road("2", D),
        road("3", O), road("4", O), road("8", O), road("9", D),
        road("10", O), road("12", O), road("15", D),
        road("5", O), road("6", O), road("7", O), road("13", O), road("14", D),
        road("102", X, "I1"), road("202", X, "I1"), road("104", X, "I1"), road("204", X, "I1"),
        road("16", M), road("17", O), road("18", O), road("19", D),
        road("109", X, "I2"), road("209", X, "I2"), road("107", X, "I2"), road("207", X, "I2"),
        road("20", M), road("21", O), road("22", O),
        road("23", M), road("24", M),
        road("11", M),
        Cell("S", CellKind.SINK, CELL_LENGTH, FREE_FLOW_SPEED, 0.5, 1.0, 1.0),
    ]
    pairs = [
        ("R1", "1"), ("1", "2"), ("2", "3"), ("2", "10"),
        ("3", "4"), ("4", "8"), ("8", "9"), ("9", "102"), ("9", "202"),
        ("10", "12"), ("12", "15"), ("15", "107"), ("15", "207"),
        ("R2", "5"), ("5", "6"), ("6", "7"), ("7", "13"), ("13", "14"),
        ("14", "104"), ("14", "204"),
        ("102", "16"), ("204", "16"), ("104", "20"), ("202", "20"),
        ("16", "17"), ("17", "18"), ("18", "19"), ("19", "109"), ("19", "209"),
        ("20", "21"), ("21", "22"),
        ("109", "23"), ("207", "23"), ("107", "24"), ("209", "24"),
        ("22", "11"), ("23", "11"), ("24", "11"), ("11", "S"),
    ]
    intersections = [
        Intersection("I1", (1, 2), (), (1, 2)),
        Intersection("I2", (1, 2), (), (1, 2)),
    ]
    phases = [
        Phase(1, "I1", frozenset({("102", "16"), ("202", "20")})),
        Phase(2, "I1", frozenset({("104", "20"), ("204", "16")})),
        Phase(1, "I2", frozenset({("109", "23"), ("209", "24")})),
        Phase(2, "I2", frozenset({("107", "24"), ("207", "23")})),
    ]
    conflicts = [
        (a, b)
        for p1, p2 in ((("102", "202"), ("104", "204")), (("109", "209"), ("107", "207")))
        for a in p1
        for b in p2
    ]
    return Network(cells, make_connectors(cells, pairs), intersections, phases, conflicts, "paper-like")


PAPER_LINKS = {
    "1-2": ["1", "2"],
    "2-3": ["3", "4", "8", "9"],
    "2-4": ["10", "12", "15"],
    "5-3": ["5", "6", "7", "13", "14"],
    "3-4": ["16", "17", "18", "19"],
    "3-6": ["20", "21", "22"],
}


def build_corridor_network() -> Network:
    """Single signalized junction fed by two short approaches.

    ``R1 -> 1 -> 2 -> 101`` and ``R2 -> 5 -> 6 -> 102`` meet at cell 3,
    then ``3 -> 4 -> S``.  Phase 1 serves 101, phase 2 serves 102.
    """
    O, M, X = CellKind.ORDINARY, CellKind.MERGE, CellKind.INTERSECTION
    cells = [
        Cell("R1", CellKind.SOURCE, CELL_LENGTH, FREE_FLOW_SPEED, 0.5, 12.0, 1.0),
        Cell("R2", CellKind.SOURCE, CELL_LENGTH, FREE_FLOW_SPEED, 0.5, 12.0, 1.0),
        _road("1", O, 6.0, 18.0), _road("2", O, 6.0, 18.0), _road("101", X, 6.0, 18.0, "I1"),
        _road("5", O, 6.0, 18.0), _road("6", O, 6.0, 18.0), _road("102", X, 6.0, 18.0, "I1"),
        _road("3", M, 6.0, 18.0), _road("4", O, 6.0, 18.0),
        Cell("S", CellKind.SINK, CELL_LENGTH, FREE_FLOW_SPEED, 0.5, 1.0, 1.0),
    ]
    pairs = [
        ("R1", "1"), ("1", "2"), ("2", "101"), ("101", "3"),
        ("R2", "5"), ("5", "6"), ("6", "102"), ("102", "3"),
        ("3", "4"), ("4", "S"),
    ]
    intersections = [Intersection("I1", (1, 2), (), (1, 2))]
    phases = [
        Phase(1, "I1", frozenset({("101", "3")})),
        Phase(2, "I1", frozenset({("102", "3")})),
    ]
    return Network(cells, make_connectors(cells, pairs), intersections, phases, [("101", "102")], "corridor")


def build_chain_network(n_road: int = 1, capacity: float = 6.0, jam: float = 18.0) -> Network:
    """``R -> 1 -> ... -> n -> S`` with uniform road cells."""
    cells = [Cell("R", CellKind.SOURCE, CELL_LENGTH, FREE_FLOW_SPEED, 0.5, 12.0, 1.0)]
    cells += [_road(str(i), CellKind.ORDINARY, capacity, jam) for i in range(1, n_road + 1)]
    cells.append(Cell("S", CellKind.SINK, CELL_LENGTH, FREE_FLOW_SPEED, 0.5, 1.0, 1.0))
    ids = [c.id for c in cells]
    return Network(cells, make_connectors(cells, list(zip(ids, ids[1:]))), name=f"chain{n_road}")
