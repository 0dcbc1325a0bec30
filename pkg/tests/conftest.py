"""Shared fixtures: bundled networks and a memoized solver for bundled cases."""

from __future__ import annotations

import functools

import numpy as np
import pytest

from sodta.analysis import solve_case
from sodta.demand import DemandProfile, Horizon
from sodta.formulation import ObjectiveConfig
from sodta.lp.solve import SolveOptions
from sodta.network import build_chain_network, build_corridor_network, build_paper_network
from sodta.scenario import bundled_path, bundled_scenario, load_scenario
from sodta.signals import SignalKind, SignalModelConfig


@pytest.fixture(scope="session")
def paper_net():
    return build_paper_network()


@pytest.fixture(scope="session")
def corridor_net():
    return build_corridor_network()


@pytest.fixture
def chain_net():
    return build_chain_network(1)


@pytest.fixture(scope="session")
def bundled():
    scn = bundled_scenario()
    net = scn.load_network()
    return scn, net, scn.load_demand(net)


@pytest.fixture(scope="session")
def corridor():
    scn = load_scenario(bundled_path("corridor.scn"))
    net = scn.load_network()
    return scn, net, scn.load_demand(net)


def signal(label: str) -> SignalModelConfig:
    if label.startswith("SCRC"):
        return SignalModelConfig(SignalKind.SCRC, int(label[4:]))
    return SignalModelConfig(SignalKind(label))


@pytest.fixture(scope="session")
def solve_bundled(bundled):
    """solve_bundled("SCRC6", "SO") -> (model, index, solution), cached per session."""
    scn, net, demand = bundled

    @functools.lru_cache(maxsize=None)
    def run(label: str, objective: str):
        return solve_case(net, demand, scn.horizon, signal(label), ObjectiveConfig(objective), SolveOptions())

    return run


@pytest.fixture(scope="session")
def solve_corridor(corridor):
    scn, net, demand = corridor

    @functools.lru_cache(maxsize=None)
    def run(label: str, objective: str, T: int = 10):
        d = DemandProfile(T, {k: v[:T] for k, v in demand.entries.items()})
        return solve_case(net, d, Horizon(T), signal(label), ObjectiveConfig(objective), SolveOptions())

    return run


def rel_close(a: float, b: float, rel: float = 1e-6) -> bool:
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


def zero_profile(T: int, net) -> DemandProfile:
    return DemandProfile(T, {c.id: np.zeros(T) for c in net.sources})


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
