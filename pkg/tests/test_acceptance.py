"""Acceptance suite: eight end-to-end criteria on the bundled and corridor scenarios.

Each test records one PASS/FAIL line; the lines are printed at the end of
the pytest run (see ``pytest_terminal_summary`` in this module's conftest
hook) and immediately when running with ``-s``.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from sodta import analysis
from sodta.ctm import conservation_residual, relaxation_violations, simulate
from sodta.formulation import ObjectiveConfig, assemble
from sodta.lp import check_solution, count_complexity, export_model
from sodta.signals import (
    SignalKind, SignalModelConfig, cycle_index, extract_green_plan, plan_violation, random_plan,
)

from conftest import rel_close, signal
from oracles import enumerate_phase_schedules

OBJECTIVES = ("SO", "flow_benefit", "DCS")
REFERENCE_M10_REDUCTION = 17.5  # percent, expected SCRC(10) reduction against MISC

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)


def scan_mps(text: str) -> tuple[int, int]:
    """(columns, rows) of a free MPS document, counted straight from the text."""
    section = None
    rows = 0
    cols: list[str] = []
    for line in text.splitlines():
        if not line.startswith(" "):
            section = line.split()[0]
            continue
        fields = line.split()
        if section == "ROWS" and fields[0] != "N":
            rows += 1
        elif section == "COLUMNS" and "'MARKER'" not in fields:
            if not cols or cols[-1] != fields[0]:
                cols.append(fields[0])
    return len(cols), rows


def verify_solution(model, index, sol, cfg, net, demand, T) -> tuple[float, float, int]:
    """(max model residual, plan structure violation, replay violations)."""
    res = check_solution(model, sol.values).max
    plan = extract_green_plan(sol, cfg, index, net)
    viol = plan_violation(plan, net, cfg)
    greens = plan.approach_greens(net)
    replay = simulate(net, demand, greens, T)
    bad = len(relaxation_violations(replay, net, 1e-9, greens))
    return res, viol, bad


@pytest.fixture(scope="module")
def verified():
    """Optimal solutions gathered by criteria 1-3 for criterion 5."""
    return []


class TestAcceptance:
    def test_1_scrc1_equals_csdt(self, solve_bundled, bundled, verified):
        scn, net, demand = bundled
        details, ok = [], True
        for obj in OBJECTIVES:
            ma, ia, a = solve_bundled("SCRC1", obj)
            mb, ib, b = solve_bundled("CSDT", obj)
            slow = max(a.stats["wall_time"], b.stats["wall_time"])
            good = a.optimal and b.optimal and rel_close(a.objective, b.objective) and slow < 60
            ok &= good
            details.append(f"{obj} {a.objective:.6f}/{b.objective:.6f} ({slow:.1f}s)")
            verified += [("SCRC1", obj, ma, ia, a, net, demand, 110), ("CSDT", obj, mb, ib, b, net, demand, 110)]
        record(1, ok, "SCRC1 vs CSDT: " + "; ".join(details))
        assert ok

    def test_2_divisor_monotonicity(self, solve_bundled, bundled, verified):
        scn, net, demand = bundled
        ok, details = True, []
        for obj in OBJECTIVES:
            o = {}
            for m in (1, 2, 3, 6):
                model, index, sol = solve_bundled(f"SCRC{m}", obj)
                assert sol.optimal
                o[m] = sol.objective
                verified.append((f"SCRC{m}", obj, model, index, sol, net, demand, 110))
            good = o[1] <= o[2] + 1e-6 and o[2] <= o[6] + 1e-6 and o[3] <= o[6] + 1e-6
            ok &= good
            details.append(f"{obj} " + " ".join(f"m{m}={v:.6f}" for m, v in o.items()))
        record(2, ok, "; ".join(details))
        assert ok

    def test_3_relaxation_ordering_and_enumeration(self, solve_corridor, corridor, verified):
        scn, net, demand = corridor
        assert len(net.intersections) == 1 and len(net.phases) == 2 and scn.horizon.T <= 20
        ok, details = True, []
        for obj in OBJECTIVES:
            mm, im, misc = solve_corridor("MISC", obj)
            mc, ic, csdt = solve_corridor("CSDT", obj)
            brute = enumerate_phase_schedules(mm, im)
            good = (
                misc.optimal and csdt.optimal and csdt.objective <= misc.objective + 1e-6
                and abs(misc.objective - brute) <= 1e-6
            )
            ok &= good
            details.append(
                f"{obj} CSDT={csdt.objective:.4f} MISC={misc.objective:.4f} "
                f"enum={brute:.4f} nodes={misc.stats.get('nodes')}"
            )
            verified += [("MISC", obj, mm, im, misc, net, demand, 10), ("CSDT", obj, mc, ic, csdt, net, demand, 10)]
        record(3, ok, "; ".join(details))
        assert ok

    def test_4_simulator_oracle(self, bundled):
        scn, net, demand = bundled
        rng = np.random.default_rng(20240611)
        kinds = [SignalKind.SCRC, SignalKind.CSDT, SignalKind.MISC]
        start = time.perf_counter()
        failures = 0
        worst_residual = 0.0
        for k in range(100):
            kind = kinds[k % 3]
            m = int(rng.integers(1, 13)) if kind is SignalKind.SCRC else 1
            g_min = float(rng.choice([0.0, 0.1, 0.3])) if kind is not SignalKind.MISC else 0.0
            plan = random_plan(net, SignalModelConfig(kind, m, g_min), 110, rng)
            greens = plan.approach_greens(net)
            traj = simulate(net, demand, greens)
            resid = conservation_residual(traj, net)
            worst_residual = max(worst_residual, resid)
            if relaxation_violations(traj, net, 1e-9, greens) or resid != 0.0:
                failures += 1
        elapsed = time.perf_counter() - start
        ok = failures == 0 and elapsed < 10.0
        record(4, ok, f"100 plans, {failures} infeasible, max conservation residual {worst_residual}, {elapsed:.2f}s")
        assert ok

    def test_5_post_hoc_verification(self, verified):
        if not verified:
            pytest.skip("criteria 1-3 did not run")
        worst_res = worst_plan = 0.0
        replay_bad = 0
        for label, obj, model, index, sol, net, demand, T in verified:
            res, viol, bad = verify_solution(model, index, sol, signal(label), net, demand, T)
            worst_res, worst_plan = max(worst_res, res), max(worst_plan, viol)
            replay_bad += bad
        ok = worst_res <= 1e-6 and worst_plan <= 1e-9 and replay_bad == 0
        record(
            5, ok,
            f"{len(verified)} solutions, max residual {worst_res:.2e}, "
            f"max plan violation {worst_plan:.2e}, replay violations {replay_bad}",
        )
        assert ok

    def test_6_complexity_accounting(self, bundled):
        scn, net, demand = bundled
        reports, exact = {}, True
        for label in ("SCRC1", "SCRC2", "SCRC3", "SCRC6", "SCRC10", "CSDT", "MISC"):
            model, _ = assemble(net, demand, scn.horizon, ObjectiveConfig(), signal(label))
            rep = count_complexity(model)
            exact &= scan_mps(export_model(model)) == (rep.n_variables, rep.n_constraints)
            reports[label] = rep
        series = [reports[f"SCRC{m}"].total for m in (1, 2, 3, 6, 10)]
        decreasing = all(a > b for a, b in zip(series, series[1:]))
        red = analysis.complexity_reduction(reports["SCRC10"], reports["CSDT"])
        red_misc = analysis.complexity_reduction(reports["SCRC10"], reports["MISC"])
        csdt = reports["CSDT"]
        ok = exact and decreasing
        record(
            6, ok,
            f"totals m=1,2,3,6,10: {series}; SCRC10 vs CSDT reduction {red:.2f}% "
            f"(reference {REFERENCE_M10_REDUCTION}%, which is measured against MISC; ours vs MISC {red_misc:.2f}%). "
            f"Green variables "
            f"({csdt.n_variables - reports['SCRC10'].n_variables} fewer) and per-cycle sum rows are the only "
            f"entries that shrink with m; the other {csdt.total - 440 - 110 * len(net.intersections)} "
            "entries are fixed by the slot grid, so the share saved is small",
        )
        assert ok

    def test_7_holding_at_source(self, solve_bundled, bundled):
        scn, net, demand = bundled
        label = scn.signal.label
        _, so_index, so = solve_bundled(label, "SO")
        so_model = solve_bundled(label, "SO")[0]
        base = analysis.cumulative_departures(so, net, so_index)
        base_slots = analysis.detect_holding(so, so_index, net, so_model).source_slots()
        ok, details = base_slots > 0, [f"SO source-holding slots {base_slots}"]
        for obj in ("flow_benefit", "DCS"):
            model, index, sol = solve_bundled(label, obj)
            dep = analysis.cumulative_departures(sol, net, index)
            margin = min(float(np.min(dep[s] - base[s])) for s in base)
            slots = analysis.detect_holding(sol, index, net, model).source_slots()
            ok &= margin >= -1e-6 and slots < base_slots
            details.append(f"{obj}: min departure lead {margin:.2e}, holding slots {slots}")
        record(7, ok, f"{label}; " + "; ".join(details))
        assert ok

    def test_8_cycle_inverse_identity(self):
        rng = np.random.default_rng(8)
        ts = rng.integers(1, 10**6 + 1, size=10**6)
        ms = rng.integers(1, 10**3 + 1, size=10**6)
        failures = 0
        for t, m in zip(ts.tolist(), ms.tolist()):
            c, eps = cycle_index(t, m)
            if (c - 1) * m + eps != t or not 1 <= eps <= m:
                failures += 1
        record(8, failures == 0, f"10^6 random (t, m) pairs, {failures} failures")
        assert failures == 0
