"""Post-solution analytics: gains, complexity, density fields, holding, tables."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .ctm import Trajectory
from .formulation import FormulationIndex, ObjectiveConfig, ObjectiveKind, assemble
from .lp.model import ComplexityReport, LinearModel, count_complexity
from .lp.solve import Solution, SolveOptions, SolverError, Status, solve
from .network import CellKind, Network
from .signals import SignalModelConfig

HOLDING_TOL = 1e-6


def objective_gain(value: float, baseline: float) -> float:
    """Percent improvement of ``value`` over ``baseline`` (minimization)."""
    if not baseline > 0:
        raise ValueError(f"baseline must be positive, got {baseline}")
    return 100.0 * (baseline - value) / baseline


def complexity_reduction(report: ComplexityReport, baseline: ComplexityReport) -> float:
    if not baseline.total > 0:
        raise ValueError("baseline model is empty")
    return 100.0 * (baseline.total - report.total) / baseline.total


# ---------------------------------------------------------------------------
# occupancy views


def occupancy_matrix(source, index: FormulationIndex | None = None) -> tuple[list[str], np.ndarray]:
    """(cells, (T, n_cells) occupancy) from a trajectory or a solution."""
    if isinstance(source, Trajectory):
        return source.cells, source.x
    if index is None:
        raise ValueError("an index is needed to read occupancies from a solution")
    values = source.values if isinstance(source, Solution) else source
    if values is None:
        raise ValueError("solution carries no variable values")
    return index.cells, index.x_array(values)


def flow_matrix(source, index: FormulationIndex | None = None) -> tuple[list[tuple[str, str]], np.ndarray]:
    if isinstance(source, Trajectory):
        return source.connectors, source.y
    values = source.values if isinstance(source, Solution) else source
    return index.connectors, index.y_array(values)


@dataclass
class DensityField:
    link: str
    cells: list[str]
    values: np.ndarray  # (n_cells, T), upstream cell in row 0
    normalized: bool = False

    @property
    def peak(self) -> float:
        return float(self.values.max(initial=0.0))


def density_field(
    source, link_cells: Sequence[str], net: Network, index: FormulationIndex | None = None,
    link: str = "link", normalize: bool = False,
) -> DensityField:
    for a, b in zip(link_cells, link_cells[1:]):
        if b not in net.successors(a):
            raise ValueError(f"cells {a} -> {b} are not consecutive in the network")
    cells, X = occupancy_matrix(source, index)
    rows = [X[:, cells.index(c)] for c in link_cells]
    vals = np.array(rows, dtype=float)
    if normalize:
        T = vals.shape[1]
        caps = np.array([[net.cell(c).N(t) for t in range(1, T + 1)] for c in link_cells])
        vals = vals / caps
    return DensityField(link, list(link_cells), vals, normalize)


def write_density(field: DensityField, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell"] + [str(t + 1) for t in range(field.values.shape[1])])
        for c, row in zip(field.cells, field.values):
            w.writerow([c] + [repr(float(v)) for v in row])


def plot_density(field: DensityField, path, title: str | None = None) -> None:
    """Space-time heatmap (slot on x, upstream cell at the bottom)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 3))
    im = ax.imshow(field.values, aspect="auto", origin="lower", cmap="viridis",
                   extent=(0.5, field.values.shape[1] + 0.5, -0.5, len(field.cells) - 0.5))
    ax.set_yticks(range(len(field.cells)), field.cells)
    ax.set_xlabel("time slot")
    ax.set_ylabel("cell")
    ax.set_title(title or f"link {field.link}")
    fig.colorbar(im, ax=ax, label="x / N" if field.normalized else "vehicles")
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
    plt.close(fig)


def cumulative_departures(source, net: Network, index: FormulationIndex | None = None) -> dict[str, np.ndarray]:
    keys, Y = flow_matrix(source, index)
    out = {}
    for c in net.sources:
        cols = [k for k, (a, _) in enumerate(keys) if a == c.id]
        out[c.id] = np.cumsum(Y[:, cols].sum(axis=1))
    return out


def cumulative_arrivals(source, net: Network, index: FormulationIndex | None = None) -> np.ndarray:
    keys, Y = flow_matrix(source, index)
    sink = net.sinks[0].id
    cols = [k for k, (_, b) in enumerate(keys) if b == sink]
    return np.cumsum(Y[:, cols].sum(axis=1))


# ---------------------------------------------------------------------------
# holding


@dataclass
class HoldingReport:
    source_holding: list[tuple[str, int]] = field(default_factory=list)
    holding_back: list[tuple[str, int]] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.source_holding and not self.holding_back

    def source_slots(self) -> int:
        return len({t for _, t in self.source_holding})


def held_flows(values: Sequence[float], index: FormulationIndex, model: LinearModel, tol: float = HOLDING_TOL):
    """Flows (i, j, t) that could grow: every inequality row and bound on them is slack."""
    x = np.asarray(values, dtype=float)
    A = model.matrix().tocsc()
    slack = np.asarray(model.rhs) - model.matrix() @ x
    ineq = np.asarray(model.senses) != "="
    ub = np.asarray(model.ub)
    held = []
    for key, j in index.y.items():
        if x[j] > ub[j] - tol:
            continue
        lo, hi = A.indptr[j], A.indptr[j + 1]
        rows = A.indices[lo:hi]
        coefs = A.data[lo:hi]
        binding = [r for r, a in zip(rows, coefs) if ineq[r] and a > 0 and slack[r] <= tol]
        if not binding:
            held.append(key)
    return held


def detect_holding(
    solution, index: FormulationIndex, net: Network, model: LinearModel, tol: float = HOLDING_TOL
) -> HoldingReport:
    """Slots where a cell keeps vehicles although its outflow could increase.

    A flow counts as held when every inequality it appears in with a
    positive coefficient is slack by more than ``tol``; that is, the flow
    sits strictly below the CTM minimum of sending and (green-restricted)
    receiving.  Held flows out of sources are source holding, held flows
    out of road cells are holding-back.
    """
    values = solution.values if isinstance(solution, Solution) else solution
    report = HoldingReport()
    seen = set()
    for i, _, t in held_flows(values, index, model, tol):
        if (i, t) in seen:
            continue
        if values[index.x[(i, t)]] <= tol:
            continue
        seen.add((i, t))
        kind = net.cell(i).kind
        if kind is CellKind.SOURCE:
            report.source_holding.append((i, t))
        elif kind is not CellKind.SINK:
            report.holding_back.append((i, t))
    report.source_holding.sort(key=lambda p: (p[1], p[0]))
    report.holding_back.sort(key=lambda p: (p[1], p[0]))
    return report


def write_holding(report: HoldingReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["type", "cell", "slot"])
        for c, t in report.source_holding:
            w.writerow(["source", c, t])
        for c, t in report.holding_back:
            w.writerow(["holding_back", c, t])


# ---------------------------------------------------------------------------
# model comparison


@dataclass
class ComparisonRow:
    signal_model: str
    objective: str
    solve_seconds: float
    n_variables: int
    n_constraints: int
    objective_value: float | None
    status: str = "optimal"


def solve_case(net, demand, horizon, signal: SignalModelConfig, objective: ObjectiveConfig, opts: SolveOptions):
    model, index = assemble(net, demand, horizon, objective, signal)
    try:
        sol = solve(model, opts)
    except SolverError as exc:
        sol = Solution(Status.LIMIT, None, None, {"error": str(exc), "wall_time": float("nan")})
    return model, index, sol


def compare_models(
    scenario,
    models: Iterable[SignalModelConfig],
    objectives: Iterable[ObjectiveKind | str],
    opts: SolveOptions | None = None,
    mip_opts: SolveOptions | None = None,
) -> list[ComparisonRow]:
    """One row per (signal model, objective), models in the given order."""
    net = scenario.load_network()
    demand = scenario.load_demand(net)
    opts = opts or scenario.solver
    rows = []
    for sig in models:
        for obj in objectives:
            cfg = ObjectiveConfig(ObjectiveKind(obj), scenario.objective.alpha)
            use = mip_opts if (mip_opts is not None and sig.kind.value == "MISC") else opts
            start = time.perf_counter()
            model, _, sol = solve_case(net, demand, scenario.horizon, sig, cfg, use)
            elapsed = time.perf_counter() - start
            cx = count_complexity(model)
            rows.append(
                ComparisonRow(
                    sig.label, ObjectiveKind(obj).value, elapsed, cx.n_variables,
                    cx.n_constraints, sol.objective, sol.status.value,
                )
            )
    return rows


COLUMNS = ["signal_model", "objective", "solve_seconds", "n_variables", "n_constraints", "objective_value", "status"]


def write_rows(rows: Sequence[ComparisonRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([getattr(r, c) for c in COLUMNS])


def format_table(rows: Sequence[ComparisonRow]) -> str:
    head = ["Signal control", "Objective", "Time (s)", "Variables", "Constraints", "Objective value", "Status"]
    body = []
    for r in rows:
        body.append([
            r.signal_model, r.objective, f"{r.solve_seconds:.3f}", str(r.n_variables),
            str(r.n_constraints), "-" if r.objective_value is None else f"{r.objective_value:.3f}", r.status,
        ])
    widths = [max(len(h), *(len(b[k]) for b in body)) if body else len(h) for k, h in enumerate(head)]
    line = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    out = [line(head), line(["-" * w for w in widths])]
    out += [line(b) for b in body]
    return "\n".join(out) + "\n"
