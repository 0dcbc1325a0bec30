"""Free-format MPS export and import.

The writer walks variables in model order and, within a column, rows in
model order, so identical models give byte-identical files.  Integer
columns are wrapped in INTORG/INTEND markers and always carry explicit
bounds, since some readers default marked columns to binary.
"""

from __future__ import annotations

import math

from .model import EQ, GE, LE, LinearModel, ModelError

_SENSE_CODE = {LE: "L", EQ: "E", GE: "G"}
_CODE_SENSE = {v: k for k, v in _SENSE_CODE.items()}
OBJ_ROW = "obj"


class MPSError(ModelError):
    pass


def _f(v: float) -> str:
    return repr(float(v))


def export_model(model: LinearModel, fmt: str = "mps") -> str:
    if fmt.lower() not in ("mps", "free-mps"):
        raise ModelError(f"unsupported export format {fmt!r}")
    if OBJ_ROW in model._con_index:
        raise MPSError(f"constraint name {OBJ_ROW!r} is reserved for the objective")

    out = [f"NAME {model.name}", "ROWS", f" N  {OBJ_ROW}"]
    out += [f" {_SENSE_CODE[s]}  {n}" for n, s in zip(model.con_names, model.senses)]

    cols: list[list[tuple[str, float]]] = [[] for _ in range(model.n_vars)]
    for j, a in sorted(model.objective.items()):
        cols[j].append((OBJ_ROW, a))
    for name, (idx, coef) in zip(model.con_names, model.rows):
        for j, a in zip(idx, coef):
            cols[j].append((name, a))

    out.append("COLUMNS")
    in_int = False
    marker = 0
    for j, entries in enumerate(cols):
        if model.integer[j] != in_int:
            tag = "'INTORG'" if model.integer[j] else "'INTEND'"
            out.append(f"    M{marker} 'MARKER' {tag}")
            marker += 1
            in_int = model.integer[j]
        name = model.var_names[j]
        if not entries:
            entries = [(OBJ_ROW, 0.0)]
        for row, a in entries:
            out.append(f"    {name} {row} {_f(a)}")
    if in_int:
        out.append(f"    M{marker} 'MARKER' 'INTEND'")

    out.append("RHS")
    for name, r in zip(model.con_names, model.rhs):
        if r != 0.0:
            out.append(f"    RHS {name} {_f(r)}")

    out.append("BOUNDS")
    for j, name in enumerate(model.var_names):
        lo, up = model.lb[j], model.ub[j]
        if lo == up:
            out.append(f" FX BND {name} {_f(lo)}")
            continue
        if lo == -math.inf and up == math.inf:
            out.append(f" FR BND {name}")
            continue
        if lo == -math.inf:
            out.append(f" MI BND {name}")
        elif lo != 0.0 or model.integer[j]:
            out.append(f" LO BND {name} {_f(lo)}")
        if up != math.inf:
            out.append(f" UP BND {name} {_f(up)}")
        elif model.integer[j]:
            out.append(f" PL BND {name}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def parse_mps(text: str) -> LinearModel:
    """Read a free-format MPS document back into a :class:`LinearModel`."""
    name = "model"
    section = None
    obj_row = None
    row_sense: dict[str, str] = {}
    row_order: list[str] = []
    col_order: list[str] = []
    col_entries: dict[str, list[tuple[str, float]]] = {}
    col_int: dict[str, bool] = {}
    rhs: dict[str, float] = {}
    bounds: dict[str, list[float]] = {}
    in_int = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.startswith("*"):
            continue
        tok = raw.split()
        if not raw[0].isspace():
            section = tok[0].upper()
            if section == "NAME":
                name = tok[1] if len(tok) > 1 else name
            elif section == "ENDATA":
                break
            elif section not in ("ROWS", "COLUMNS", "RHS", "BOUNDS"):
                raise MPSError(f"line {lineno}: unsupported section {tok[0]}")
            continue
        if section == "ROWS":
            code, rname = tok[0].upper(), tok[1]
            if code == "N":
                if obj_row is None:
                    obj_row = rname
                continue
            if code not in _CODE_SENSE:
                raise MPSError(f"line {lineno}: bad row type {code}")
            row_sense[rname] = _CODE_SENSE[code]
            row_order.append(rname)
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1].strip("'").upper() == "MARKER":
                flag = tok[2].strip("'").upper()
                in_int = flag == "INTORG"
                continue
            cname = tok[0]
            if cname not in col_entries:
                col_order.append(cname)
                col_entries[cname] = []
                col_int[cname] = in_int
            pairs = tok[1:]
            if len(pairs) % 2:
                raise MPSError(f"line {lineno}: odd number of fields")
            for k in range(0, len(pairs), 2):
                col_entries[cname].append((pairs[k], float(pairs[k + 1])))
        elif section == "RHS":
            pairs = tok[1:] if len(tok) % 2 else tok
            for k in range(0, len(pairs), 2):
                rhs[pairs[k]] = float(pairs[k + 1])
        elif section == "BOUNDS":
            kind, cname = tok[0].upper(), tok[2]
            val = float(tok[3]) if len(tok) > 3 else None
            b = bounds.setdefault(cname, [0.0, math.inf])
            if kind == "UP":
                b[1] = val
                if val < 0 and b[0] == 0.0:
                    b[0] = -math.inf
            elif kind in ("LO", "LI"):
                b[0] = val
            elif kind == "UI":
                b[1] = val
            elif kind == "FX":
                b[0] = b[1] = val
            elif kind == "FR":
                b[0], b[1] = -math.inf, math.inf
            elif kind == "MI":
                b[0] = -math.inf
            elif kind == "PL":
                b[1] = math.inf
            elif kind == "BV":
                b[0], b[1] = 0.0, 1.0
                col_int[cname] = True
            else:
                raise MPSError(f"line {lineno}: unsupported bound type {kind}")

    model = LinearModel(name=name)
    for cname in col_order:
        lo, up = bounds.get(cname, [0.0, math.inf])
        model.add_var(cname, lo, up, col_int[cname])
    rows: dict[str, list[tuple[int, float]]] = {r: [] for r in row_order}
    for j, cname in enumerate(col_order):
        for rname, a in col_entries[cname]:
            if rname == obj_row:
                model.add_objective(j, a)
            elif rname in rows:
                rows[rname].append((j, a))
            else:
                raise MPSError(f"column {cname} references unknown row {rname}")
    for rname in row_order:
        model.add_constraint(rname, rows[rname], row_sense[rname], rhs.get(rname, 0.0))
    return model
