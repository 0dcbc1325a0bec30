"""End-to-end command-line behaviour and exit codes."""

import subprocess
import sys

import pytest
import yaml

from sodta import cli
from sodta.lp import Solution, SolverError, Status
from sodta.scenario import bundled_path

BUNDLED = str(bundled_path("paper-like.scn"))
CORRIDOR = str(bundled_path("corridor.scn"))
ARTIFACTS = [
    "effective_config.yaml", "model.mps", "solution.csv", "green_plan.csv", "density_2-3.csv",
    "density_3-4.csv", "holding.csv", "summary.yaml", "stats.yaml",
]


@pytest.fixture(scope="module")
def bundled_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = cli.main(["run", BUNDLED, "--out", str(out)])
    return code, out


def write_scenario(path, **doc):
    path.write_text(yaml.safe_dump(doc))
    return str(path)


class TestRun:
    def test_bundled_run(self, bundled_run):
        code, out = bundled_run
        assert code == cli.EXIT_OK
        for name in ARTIFACTS:
            assert (out / name).exists(), name
        summary = yaml.safe_load((out / "summary.yaml").read_text())
        assert summary["status"] == "optimal" and summary["signal_model"] == "SCRC6"

    def test_deterministic_artifacts(self, bundled_run, tmp_path):
        _, first = bundled_run
        assert cli.main(["run", BUNDLED, "--out", str(tmp_path)]) == 0
        for name in ("model.mps", "summary.yaml", "effective_config.yaml"):
            if name == "effective_config.yaml":
                a = yaml.safe_load((first / name).read_text())
                b = yaml.safe_load((tmp_path / name).read_text())
                a.pop("output"), b.pop("output")
                assert a == b
            else:
                assert (first / name).read_bytes() == (tmp_path / name).read_bytes()

    def test_plots(self, tmp_path):
        pytest.importorskip("matplotlib")
        assert cli.main(["run", CORRIDOR, "--out", str(tmp_path), "--plots"]) == 0
        assert (tmp_path / "density_R1-approach.svg").exists()

    def test_missing_network(self, tmp_path, capsys):
        scn = write_scenario(tmp_path / "bad.scn", network="nowhere.net", demand=str(bundled_path("paper_demand.txt")))
        assert cli.main(["run", scn]) == cli.EXIT_CONFIG
        assert "network file not found" in capsys.readouterr().err

    def test_missing_scenario(self):
        assert cli.main(["run", "/no/such/file.scn"]) == cli.EXIT_CONFIG

    def test_zero_demand(self, tmp_path):
        scn = write_scenario(
            tmp_path / "zero.scn", network=str(bundled_path("paper_network.net")),
            regime={"light_slots": 0, "light_level": 0.0, "heavy_level": 0.0},
            horizon={"T": 20}, signal={"kind": "SCRC", "m": 6}, output=str(tmp_path / "out"),
        )
        assert cli.main(["run", scn]) == cli.EXIT_OK
        summary = yaml.safe_load((tmp_path / "out" / "summary.yaml").read_text())
        assert summary["objective"] == pytest.approx(0.0, abs=1e-9)

    def test_overrides_reach_effective_config(self, tmp_path):
        code = cli.main([
            "run", CORRIDOR, "--out", str(tmp_path), "--signal", "SCRC", "--m", "2",
            "--objective", "flow_benefit", "--alpha", "0.01", "--g-min", "0.1",
        ])
        assert code == 0
        eff = yaml.safe_load((tmp_path / "effective_config.yaml").read_text())
        assert eff["signal"] == {"kind": "SCRC", "m": 2, "g_min": 0.1, "pairing": True}
        assert eff["objective"] == {"kind": "flow_benefit", "alpha": 0.01}

    def test_node_limit_exit(self, tmp_path):
        code = cli.main(["run", CORRIDOR, "--out", str(tmp_path), "--node-limit", "1"])
        assert code == cli.EXIT_LIMIT

    def test_minimum_green_above_phase_share(self, tmp_path):
        scn = write_scenario(
            tmp_path / "g.scn", network=str(bundled_path("corridor_network.net")),
            demand=str(bundled_path("corridor_demand.txt")), horizon={"T": 10},
            signal={"kind": "CSDT", "g_min": 0.5}, output=str(tmp_path / "o"),
        )
        assert cli.main(["run", scn]) == cli.EXIT_OK
        assert cli.main(["run", scn, "--g-min", "0.7"]) == cli.EXIT_CONFIG

    @pytest.mark.parametrize(
        "status, code",
        [(Status.INFEASIBLE, cli.EXIT_INFEASIBLE), (Status.UNBOUNDED, cli.EXIT_UNBOUNDED)],
    )
    def test_status_exit_codes(self, tmp_path, monkeypatch, status, code):
        monkeypatch.setattr(cli, "solve", lambda model, opts: Solution(status, None, None, {"wall_time": 0.0}))
        assert cli.main(["run", CORRIDOR, "--out", str(tmp_path)]) == code
        assert yaml.safe_load((tmp_path / "summary.yaml").read_text())["status"] == status.value
        assert not (tmp_path / "solution.csv").exists()

    def test_solver_failure_exit(self, tmp_path, monkeypatch, capsys):
        def boom(model, opts):
            raise SolverError("numerical trouble")

        monkeypatch.setattr(cli, "solve", boom)
        assert cli.main(["run", CORRIDOR, "--out", str(tmp_path)]) == cli.EXIT_SOLVER
        assert "numerical trouble" in capsys.readouterr().err

    def test_bad_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["run"])
        assert exc.value.code == cli.EXIT_USAGE

    def test_console_script(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "sodta.cli", "run", "/no/such.scn"], capture_output=True, text=True
        )
        assert proc.returncode == cli.EXIT_CONFIG
        assert "configuration error" in proc.stderr


class TestVerify:
    def test_after_run(self, bundled_run, capsys):
        _, out = bundled_run
        capsys.readouterr()
        assert cli.main(["verify", BUNDLED, "--out", str(out)]) == cli.EXIT_OK
        report = yaml.safe_load((out / "verify.yaml").read_text())
        assert report["max_constraint_residual"] <= 1e-6
        assert report["replay_relaxation_violations"] == 0
        assert report["replay_conservation_residual"] == 0.0
        assert report["plan_violation"] <= 1e-9
        assert report["model_matches_export"]

    def test_tampered_solution(self, bundled_run, tmp_path):
        _, out = bundled_run
        for name in ("model.mps", "green_plan.csv", "effective_config.yaml"):
            (tmp_path / name).write_bytes((out / name).read_bytes())
        lines = (out / "solution.csv").read_text().splitlines()
        k = next(i for i, l in enumerate(lines) if l.startswith("x_4_50,"))
        name, value = lines[k].split(",")
        lines[k] = f"{name},{float(value) + 1.0!r}"
        (tmp_path / "solution.csv").write_text("\n".join(lines) + "\n")
        assert cli.main(["verify", BUNDLED, "--out", str(tmp_path)]) == cli.EXIT_VERIFY
        report = yaml.safe_load((tmp_path / "verify.yaml").read_text())
        assert report["max_constraint_residual"] >= 1.0 - 1e-9
        assert not report["passed"]
        assert any("_4_" in n for n, _ in report["worst_constraints"])

    def test_missing_artifacts(self, tmp_path, capsys):
        assert cli.main(["verify", BUNDLED, "--out", str(tmp_path)]) == cli.EXIT_CONFIG
        assert "missing run artifacts" in capsys.readouterr().err


class TestSweep:
    def test_unit_cycle_matches_csdt(self, tmp_path):
        rows = cli.sweep_scenario(cli.load_scenario(BUNDLED).with_(output=tmp_path), [1])
        by = {r["label"]: r for r in rows}
        a, b = by["SCRC1"]["objective"], by["CSDT"]["objective"]
        assert abs(a - b) <= 1e-6 * max(1.0, abs(b))
        assert (tmp_path / "sweep.csv").exists()
        assert (tmp_path / "sweep" / "SCRC1" / "summary.yaml").exists()

    def test_non_decreasing_series(self, tmp_path):
        code = cli.main(["sweep", CORRIDOR, "--out", str(tmp_path), "--cycles", "1,2,6", "--misc"])
        assert code == 0
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        head = lines[0].split(",")
        rows = [dict(zip(head, l.split(","))) for l in lines[1:]]
        objs = [float(r["objective"]) for r in rows if r["kind"] == "SCRC"]
        assert all(a <= b + 1e-6 for a, b in zip(objs, objs[1:]))
        assert {r["baseline"] for r in rows} == {"MISC"}
        totals = [int(r["total"]) for r in rows if r["kind"] == "SCRC"]
        assert totals == sorted(totals, reverse=True)

    def test_empty_list(self, tmp_path, capsys):
        assert cli.main(["sweep", CORRIDOR, "--out", str(tmp_path), "--cycles", ""]) == cli.EXIT_USAGE
        assert "usage error" in capsys.readouterr().err

    def test_bad_list(self, tmp_path):
        assert cli.main(["sweep", CORRIDOR, "--out", str(tmp_path), "--cycles", "1,x"]) == cli.EXIT_USAGE


class TestCompare:
    def test_outputs(self, tmp_path):
        assert cli.main(["compare", CORRIDOR, "--out", str(tmp_path)]) == 0
        assert len((tmp_path / "compare.csv").read_text().splitlines()) == 10
        assert "Signal control" in (tmp_path / "compare.txt").read_text()

    def test_unknown_model(self, tmp_path):
        assert cli.main(["compare", CORRIDOR, "--out", str(tmp_path), "--models", "FOO"]) == cli.EXIT_CONFIG


class TestScenario:
    def test_default_output_is_relative_to_cwd(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert cli.main(["run", CORRIDOR]) == 0
        assert (tmp_path / "out" / "corridor" / "summary.yaml").exists()

    def test_unknown_solver_option(self, tmp_path):
        scn = write_scenario(
            tmp_path / "s.scn", network=str(bundled_path("corridor_network.net")),
            demand=str(bundled_path("corridor_demand.txt")), horizon={"T": 10}, solver={"turbo": True},
        )
        assert cli.main(["run", scn]) == cli.EXIT_CONFIG

    def test_horizon_mismatch(self, tmp_path, capsys):
        scn = write_scenario(
            tmp_path / "s.scn", network=str(bundled_path("corridor_network.net")),
            demand=str(bundled_path("corridor_demand.txt")), horizon={"T": 12},
        )
        assert cli.main(["run", scn, "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
        assert "horizon" in capsys.readouterr().err

    def test_unparsable_yaml(self, tmp_path):
        (tmp_path / "s.scn").write_text("network: [unclosed\n")
        assert cli.main(["run", str(tmp_path / "s.scn")]) == cli.EXIT_CONFIG

    def test_effective_config_reloads(self, tmp_path):
        assert cli.main(["run", CORRIDOR, "--out", str(tmp_path)]) == 0
        from sodta.scenario import load_scenario

        again = load_scenario(tmp_path / "effective_config.yaml")
        original = load_scenario(CORRIDOR)
        assert again.signal == original.signal and again.horizon == original.horizon
        assert again.network_path == original.network_path
