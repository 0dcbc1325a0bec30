"""Text formats for networks and demand profiles.

Network files are sectioned, whitespace-separated tables::

    # sodta network v1
    name = paper-like
    [cells]
    id kind length free_flow_speed delta capacity jam_capacity intersection
    R1 source 152.4 15.24 0.5 12.0 1.0 -
    ...
    [profiles]            # optional per-slot overrides
    cell field values
    3 capacity 6.0,6.0,3.0
    [connectors]
    from to kind
    R1 1 R
    [intersections]
    id phases pairs sum_group
    I1 1,2 - 1,2          # pairs as 1:5,2:6
    [phases]
    intersection phase movements
    I1 1 102>16,202>20
    [conflicts]
    a b
    102 104

Numbers are written with ``repr`` so a write/read cycle is lossless.
Demand files are a header row ``slot <source ids...>`` followed by one row
per slot.
"""

from __future__ import annotations

from pathlib import Path

from .demand import DemandProfile
from .network import Cell, CellKind, Connector, ConnectorKind, Intersection, Network, Phase

NETWORK_MAGIC = "# sodta network v1"


class FormatError(ValueError):
    pass


def _num(x: float) -> str:
    return repr(float(x))


def _ints(s: str) -> tuple[int, ...]:
    return () if s == "-" else tuple(int(v) for v in s.split(","))


def dumps_network(net: Network) -> str:
    out = [NETWORK_MAGIC, f"name = {net.name}", "", "[cells]"]
    out.append("id kind length free_flow_speed delta capacity jam_capacity intersection")
    for c in net.cells:
        out.append(
            " ".join(
                [c.id, c.kind.value, _num(c.length), _num(c.free_flow_speed), _num(c.delta),
                 _num(c.capacity), _num(c.jam_capacity), c.intersection or "-"]
            )
        )
    profiled = [c for c in net.cells if c.capacity_profile or c.jam_profile]
    if profiled:
        out += ["", "[profiles]", "cell field values"]
        for c in profiled:
            if c.capacity_profile:
                out.append(f"{c.id} capacity " + ",".join(map(_num, c.capacity_profile)))
            if c.jam_profile:
                out.append(f"{c.id} jam_capacity " + ",".join(map(_num, c.jam_profile)))
    out += ["", "[connectors]", "from to kind"]
    out += [f"{c.source} {c.target} {c.kind.value}" for c in net.connectors]
    out += ["", "[intersections]", "id phases pairs sum_group"]
    for i in net.intersections:
        pairs = ",".join(f"{a}:{b}" for a, b in i.pairing_rules) or "-"
        out.append(
            f"{i.id} {','.join(map(str, i.phases)) or '-'} {pairs} "
            f"{','.join(map(str, i.group_for_sum)) or '-'}"
        )
    out += ["", "[phases]", "intersection phase movements"]
    for p in net.phases:
        moves = ",".join(f"{a}>{b}" for a, b in sorted(p.movements))
        out.append(f"{p.intersection} {p.id} {moves}")
    out += ["", "[conflicts]", "a b"]
    out += [f"{a} {b}" for a, b in net.conflicts]
    return "\n".join(out) + "\n"


def loads_network(text: str) -> Network:
    lines = text.splitlines()
    if not lines or lines[0].strip() != NETWORK_MAGIC:
        raise FormatError("missing network header")
    name = "network"
    sections: dict[str, list[list[str]]] = {}
    current = None
    header_pending = False
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = []
            header_pending = True
            continue
        if current is None:
            key, _, value = line.partition("=")
            if key.strip() != "name":
                raise FormatError(f"line {lineno}: unknown key {key.strip()!r}")
            name = value.strip()
            continue
        if header_pending:
            header_pending = False
            continue
        sections[current].append(line.split())

    profiles: dict[tuple[str, str], tuple[float, ...]] = {}
    for row in sections.get("profiles", []):
        profiles[(row[0], row[1])] = tuple(float(v) for v in row[2].split(","))
    try:
        cells = [
            Cell(
                r[0], CellKind(r[1]), float(r[2]), float(r[3]), float(r[4]), float(r[5]),
                float(r[6]), None if r[7] == "-" else r[7],
                profiles.get((r[0], "capacity")), profiles.get((r[0], "jam_capacity")),
            )
            for r in sections.get("cells", [])
        ]
        connectors = [Connector(r[0], r[1], ConnectorKind(r[2])) for r in sections.get("connectors", [])]
        intersections = []
        for r in sections.get("intersections", []):
            pairs = () if r[2] == "-" else tuple(
                tuple(int(v) for v in p.split(":")) for p in r[2].split(",")
            )
            intersections.append(Intersection(r[0], _ints(r[1]), pairs, _ints(r[3])))
        phases = [
            Phase(int(r[1]), r[0], frozenset(tuple(m.split(">")) for m in r[2].split(",")))
            for r in sections.get("phases", [])
        ]
        conflicts = [(r[0], r[1]) for r in sections.get("conflicts", [])]
    except (IndexError, ValueError) as exc:
        raise FormatError(f"malformed network table: {exc}") from exc
    return Network(cells, connectors, intersections, phases, conflicts, name)


def write_network(net: Network, path) -> None:
    Path(path).write_text(dumps_network(net))


def read_network(path) -> Network:
    return loads_network(Path(path).read_text())


def dumps_demand(profile: DemandProfile) -> str:
    ids = list(profile.entries)
    out = [" ".join(["slot", *ids])]
    for t in range(profile.T):
        out.append(" ".join([str(t + 1), *(_num(profile.entries[c][t]) for c in ids)]))
    return "\n".join(out) + "\n"


def loads_demand(text: str) -> DemandProfile:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or rows[0][0] != "slot":
        raise FormatError("demand file must start with a 'slot' header")
    ids = rows[0][1:]
    body = rows[1:]
    for i, r in enumerate(body, start=1):
        if int(r[0]) != i or len(r) != len(ids) + 1:
            raise FormatError(f"demand row {i} malformed")
    return DemandProfile(len(body), {c: tuple(float(r[k + 1]) for r in body) for k, c in enumerate(ids)})


def write_demand(profile: DemandProfile, path) -> None:
    Path(path).write_text(dumps_demand(profile))


def read_demand(path) -> DemandProfile:
    return loads_demand(Path(path).read_text())
