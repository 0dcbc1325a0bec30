"""Command-line front end: ``sodta run|sweep|verify|compare SCENARIO``.

Exit codes
    0  optimal / verification passed
    2  usage error
    3  configuration error (missing or malformed files, bad options)
    4  model infeasible
    5  model unbounded
    6  iteration, node or time limit reached
    7  solver failure
    8  verification found residuals above tolerance
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import analysis
from .ctm import conservation_residual, occupancy_violation, relaxation_violations, simulate, write_trajectory
from .formulation import FormulationError, ObjectiveConfig, ObjectiveKind, assemble
from .io import FormatError
from .lp.model import check_solution, count_complexity
from .lp.mps import export_model, parse_mps
from .lp.solve import SolverError, Status, solve
from .scenario import Scenario, ScenarioError, load_scenario
from .signals import (
    GreenPlan, IntegrityError, SignalConfigError, SignalKind, SignalModelConfig,
    extract_green_plan, plan_violation, read_green_plan, write_green_plan,
)

log = logging.getLogger("sodta")

EXIT_OK, EXIT_USAGE, EXIT_CONFIG = 0, 2, 3
EXIT_INFEASIBLE, EXIT_UNBOUNDED, EXIT_LIMIT, EXIT_SOLVER, EXIT_VERIFY = 4, 5, 6, 7, 8
STATUS_EXIT = {
    Status.OPTIMAL: EXIT_OK, Status.INFEASIBLE: EXIT_INFEASIBLE,
    Status.UNBOUNDED: EXIT_UNBOUNDED, Status.LIMIT: EXIT_LIMIT,
}
VERIFY_TOL = 1e-6

CONFIG_ERRORS = (ScenarioError, FormatError, FormulationError, SignalConfigError, OSError)


class UsageError(Exception):
    pass


def _dump(doc, path: Path) -> None:
    path.write_text(yaml.safe_dump(doc, sort_keys=False, default_flow_style=None))


def _apply_overrides(scn: Scenario, args) -> Scenario:
    changes = {}
    if getattr(args, "out", None):
        changes["output"] = Path(args.out)
    obj = scn.objective
    if getattr(args, "objective", None) or getattr(args, "alpha", None) is not None:
        obj = ObjectiveConfig(args.objective or obj.kind, args.alpha if args.alpha is not None else obj.alpha)
    changes["objective"] = obj
    sig = scn.signal
    if getattr(args, "signal", None) or getattr(args, "m", None) or getattr(args, "g_min", None) is not None:
        sig = SignalModelConfig(
            SignalKind(args.signal) if args.signal else sig.kind,
            args.m or sig.m,
            args.g_min if args.g_min is not None else sig.g_min,
            sig.pairing,
        )
    changes["signal"] = sig
    solver = scn.solver
    for name in ("backend", "node_limit", "time_limit"):
        value = getattr(args, name, None)
        if value is not None:
            solver = dataclasses.replace(solver, **{name: value})
    changes["solver"] = solver
    return scn.with_(**changes)


def _inputs(scn: Scenario):
    net = scn.load_network()
    demand = scn.load_demand(net)
    return net, demand


def _summary(scn, model, sol, plan, holding) -> dict:
    cx = count_complexity(model)
    doc = {
        "model": model.name,
        "status": sol.status.value,
        "objective": None if sol.objective is None else float(sol.objective),
        "n_variables": cx.n_variables,
        "n_constraints": cx.n_constraints,
        "complexity_total": cx.total,
        "signal_model": scn.signal.label,
        "objective_kind": ObjectiveKind(scn.objective.kind).value,
    }
    if holding is not None:
        doc["source_holding_slots"] = len(holding.source_holding)
        doc["holding_back_slots"] = len(holding.holding_back)
    if plan is not None:
        doc["green_periods"] = len({k for _, _, k in plan.values})
    return doc


def run_scenario(scn: Scenario, plots: bool = False) -> int:
    net, demand = _inputs(scn)
    out = scn.output
    out.mkdir(parents=True, exist_ok=True)
    _dump(scn.effective_config(), out / "effective_config.yaml")
    model, index = assemble(net, demand, scn.horizon, scn.objective, scn.signal)
    (out / "model.mps").write_text(export_model(model))
    sol = solve(model, scn.solver)
    _dump({"wall_time": float(sol.stats.get("wall_time", 0.0)),
           "nodes": sol.stats.get("nodes"), "backend": sol.stats.get("backend")}, out / "stats.yaml")
    plan = holding = None
    if sol.optimal:
        with open(out / "solution.csv", "w") as fh:
            fh.write("name,value\n")
            for name, v in zip(model.var_names, sol.values):
                fh.write(f"{name},{float(v)!r}\n")
        plan = extract_green_plan(sol, scn.signal, index, net) if net.intersections else None
        if plan is not None:
            write_green_plan(plan, out / "green_plan.csv")
        for link, cells in scn.density_links.items():
            field = analysis.density_field(sol, cells, net, index, link=link)
            analysis.write_density(field, out / f"density_{link}.csv")
            if plots:
                analysis.plot_density(field, out / f"density_{link}.svg")
        holding = analysis.detect_holding(sol, index, net, model)
        analysis.write_holding(holding, out / "holding.csv")
    _dump(_summary(scn, model, sol, plan, holding), out / "summary.yaml")
    log.info("%s: %s objective=%s", model.name, sol.status.value, sol.objective)
    return STATUS_EXIT[sol.status]


def verify_scenario(scn: Scenario) -> tuple[int, dict]:
    out = scn.output
    needed = [out / "model.mps", out / "solution.csv"]
    missing = [str(p) for p in needed if not p.exists()]
    if missing:
        raise ScenarioError(f"missing run artifacts: {', '.join(missing)}")
    net, demand = _inputs(scn)
    model, index = assemble(net, demand, scn.horizon, scn.objective, scn.signal)
    exported = parse_mps((out / "model.mps").read_text())
    values = np.zeros(model.n_vars)
    seen = set()
    for line in (out / "solution.csv").read_text().splitlines()[1:]:
        name, v = line.rsplit(",", 1)
        values[model.var(name)] = float(v)
        seen.add(name)
    if len(seen) != model.n_vars:
        raise ScenarioError("solution file does not cover every model variable")
    res = check_solution(model, values)
    report = {
        "model_matches_export": model.same_as(exported),
        "max_constraint_residual": res.max_constraint,
        "max_bound_residual": res.max_bound,
        "worst_constraints": [[n, v] for n, v in res.worst],
    }
    ok = report["model_matches_export"] and res.max <= VERIFY_TOL
    if (out / "green_plan.csv").exists():
        plan = read_green_plan(out / "green_plan.csv")
        traj = simulate(net, demand, plan, scn.horizon.T)
        write_trajectory(traj, out / "replay_trajectory.csv")
        viol = relaxation_violations(traj, net, 1e-9, plan.approach_greens(net))
        report.update(
            plan_violation=plan_violation(plan, net, scn.signal),
            replay_relaxation_violations=len(viol),
            replay_conservation_residual=conservation_residual(traj, net),
            replay_occupancy_violation=occupancy_violation(traj, net),
            replay_arrivals=float(analysis.cumulative_arrivals(traj, net)[-1]),
        )
        ok = ok and not viol and report["plan_violation"] <= 1e-9
    report["passed"] = bool(ok)
    _dump(report, out / "verify.yaml")
    return (EXIT_OK if ok else EXIT_VERIFY), report


def sweep_scenario(scn: Scenario, cycle_lengths: list[int], include_misc: bool = False, mip_opts=None) -> list[dict]:
    if not cycle_lengths:
        raise UsageError("sweep needs at least one cycle length")
    net, demand = _inputs(scn)
    configs = [SignalModelConfig(SignalKind.SCRC, m, scn.signal.g_min, scn.signal.pairing) for m in cycle_lengths]
    configs.append(SignalModelConfig(SignalKind.CSDT, 1, scn.signal.g_min, scn.signal.pairing))
    if include_misc:
        configs.append(SignalModelConfig(SignalKind.MISC))
    results = []
    for cfg in configs:
        opts = mip_opts if (mip_opts is not None and cfg.kind is SignalKind.MISC) else scn.solver
        model, _, sol = analysis.solve_case(net, demand, scn.horizon, cfg, scn.objective, opts)
        entry_dir = scn.output / "sweep" / cfg.label
        entry_dir.mkdir(parents=True, exist_ok=True)
        cx = count_complexity(model)
        row = {
            "label": cfg.label, "kind": cfg.kind.value, "m": cfg.period, "status": sol.status.value,
            "objective": sol.objective, "n_variables": cx.n_variables,
            "n_constraints": cx.n_constraints, "total": cx.total,
        }
        _dump(row, entry_dir / "summary.yaml")
        row["report"] = cx
        results.append(row)
    base = next((r for r in results if r["kind"] == "MISC" and r["status"] == "optimal"), None)
    base = base or next(r for r in results if r["kind"] == "CSDT")
    for r in results:
        r["baseline"] = base["label"]
        r["objective_gain_pct"] = (
            analysis.objective_gain(r["objective"], base["objective"])
            if r["objective"] is not None and base["objective"] else None
        )
        r["complexity_reduction_pct"] = analysis.complexity_reduction(r["report"], base["report"])
    cols = ["label", "kind", "m", "status", "objective", "n_variables", "n_constraints", "total",
            "baseline", "objective_gain_pct", "complexity_reduction_pct"]
    lines = [",".join(cols)]
    for r in results:
        lines.append(",".join("" if r[c] is None else str(r[c]) for c in cols))
    scn.output.mkdir(parents=True, exist_ok=True)
    (scn.output / "sweep.csv").write_text("\n".join(lines) + "\n")
    return results


def _parse_models(text: str) -> list[SignalModelConfig]:
    out = []
    for tok in text.split(","):
        tok = tok.strip().upper()
        if tok.startswith("SCRC"):
            out.append(SignalModelConfig(SignalKind.SCRC, int(tok[4:] or 1)))
        else:
            out.append(SignalModelConfig(SignalKind(tok)))
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sodta", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("scenario")
        sp.add_argument("--out", help="output directory (overrides the scenario)")
        sp.add_argument("--objective", choices=[k.value for k in ObjectiveKind])
        sp.add_argument("--alpha", type=float, help="flow-benefit weight")
        sp.add_argument("--signal", choices=[k.value for k in SignalKind])
        sp.add_argument("--m", type=int, help="SCRC cycle length in slots")
        sp.add_argument("--g-min", dest="g_min", type=float)
        sp.add_argument("--backend", choices=["reference", "highs-mip", "cbc"])
        sp.add_argument("--node-limit", dest="node_limit", type=int)
        sp.add_argument("--time-limit", dest="time_limit", type=float)

    r = sub.add_parser("run", help="assemble, solve and write all artifacts")
    common(r)
    r.add_argument("--plots", action="store_true", help="also write SVG density heatmaps")
    s = sub.add_parser("sweep", help="SCRC cycle-length sweep against CSDT (and MISC)")
    common(s)
    s.add_argument("--cycles", required=True, help="comma-separated cycle lengths, e.g. 1,2,6")
    s.add_argument("--misc", action="store_true", help="include the mixed-integer baseline")
    v = sub.add_parser("verify", help="re-check a previous run's artifacts")
    common(v)
    c = sub.add_parser("compare", help="models x objectives comparison table")
    common(c)
    c.add_argument("--models", default="CSDT,MISC,SCRC6")
    c.add_argument("--objectives", default="SO,flow_benefit,DCS")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        scn = _apply_overrides(load_scenario(args.scenario), args)
        if args.command == "run":
            return run_scenario(scn, plots=args.plots)
        if args.command == "verify":
            code, report = verify_scenario(scn)
            print(yaml.safe_dump(report, sort_keys=False), end="")
            return code
        if args.command == "sweep":
            try:
                cycles = [int(v) for v in args.cycles.split(",") if v.strip()]
            except ValueError:
                raise UsageError(f"bad cycle list {args.cycles!r}") from None
            rows = sweep_scenario(scn, cycles, include_misc=args.misc)
            for r in rows:
                print(f"{r['label']:>8} {r['status']:>10} obj={r['objective']} total={r['total']} "
                      f"gain={r['objective_gain_pct']} reduction={r['complexity_reduction_pct']:.3f}%")
            return EXIT_OK
        if args.command == "compare":
            rows = analysis.compare_models(
                scn, _parse_models(args.models), [o.strip() for o in args.objectives.split(",")]
            )
            scn.output.mkdir(parents=True, exist_ok=True)
            analysis.write_rows(rows, scn.output / "compare.csv")
            table = analysis.format_table(rows)
            (scn.output / "compare.txt").write_text(table)
            print(table, end="")
            return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrityError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_USAGE


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
