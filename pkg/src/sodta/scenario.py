"""Scenario documents (YAML) tying network, demand, model and solver together.

Example::

    network: paper_network.net
    demand: paper_demand.txt          # or a `regime:` mapping
    horizon: {T: 110, tau: 10}
    objective: {kind: SO}             # alpha optional for flow_benefit
    signal: {kind: SCRC, m: 6, g_min: 0.0, pairing: true}
    solver: {backend: reference, node_limit: 100000}
    output: out/paper-like

Relative input paths (network, demand) resolve against the scenario
file's directory; a relative ``output`` resolves against the working
directory so that bundled scenarios never write inside the package.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .demand import DemandProfile, Horizon, make_regime_profile
from .formulation import ObjectiveConfig, ObjectiveKind
from .io import read_demand, read_network
from .lp.solve import SolveOptions
from .network import Network
from .signals import SignalKind, SignalModelConfig


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    network_path: Path
    horizon: Horizon
    objective: ObjectiveConfig
    signal: SignalModelConfig
    solver: SolveOptions
    output: Path
    demand_path: Path | None = None
    regime: dict[str, Any] | None = None
    density_links: dict[str, list[str]] = field(default_factory=dict)
    source: Path | None = None

    def load_network(self) -> Network:
        if not self.network_path.exists():
            raise ScenarioError(f"network file not found: {self.network_path}")
        return read_network(self.network_path)

    def load_demand(self, net: Network) -> DemandProfile:
        if self.demand_path is not None:
            if not self.demand_path.exists():
                raise ScenarioError(f"demand file not found: {self.demand_path}")
            profile = read_demand(self.demand_path)
        elif self.regime is not None:
            r = dict(self.regime)
            sources = r.pop("sources", None) or [c.id for c in net.sources]
            profile = make_regime_profile(self.horizon, sources, **r)
        else:
            raise ScenarioError("scenario needs a demand file or a regime")
        if profile.T != self.horizon.T:
            raise ScenarioError(f"demand covers {profile.T} slots but the horizon is {self.horizon.T}")
        profile.check_sources(net)
        return profile

    def with_(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def effective_config(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"network": str(self.network_path)}
        if self.demand_path is not None:
            doc["demand"] = str(self.demand_path)
        if self.regime is not None:
            doc["regime"] = dict(self.regime)
        doc["horizon"] = {"T": self.horizon.T, "tau": self.horizon.tau}
        doc["objective"] = {"kind": ObjectiveKind(self.objective.kind).value, "alpha": self.objective.alpha}
        doc["signal"] = {
            "kind": self.signal.kind.value, "m": self.signal.m,
            "g_min": self.signal.g_min, "pairing": self.signal.pairing,
        }
        doc["solver"] = dataclasses.asdict(self.solver)
        doc["density_links"] = {k: list(v) for k, v in self.density_links.items()}
        doc["output"] = str(self.output)
        return doc


def _path(base: Path, value) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def load_scenario(path, **overrides) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ScenarioError(f"cannot parse {path}: {exc}") from exc
    return scenario_from_dict(doc, path.parent, source=path, **overrides)


def scenario_from_dict(doc: dict, base: Path, source: Path | None = None, **overrides) -> Scenario:
    if "network" not in doc:
        raise ScenarioError("scenario lacks a 'network' entry")
    try:
        hz = doc.get("horizon", {})
        horizon = Horizon(int(hz.get("T", 110)), float(hz.get("tau", 10.0)))
        ob = doc.get("objective", {})
        objective = ObjectiveConfig(ob.get("kind", "SO"), ob.get("alpha"))
        sg = doc.get("signal", {})
        signal = SignalModelConfig(
            SignalKind(sg.get("kind", "SCRC")), int(sg.get("m", 1)),
            float(sg.get("g_min", 0.0)), bool(sg.get("pairing", True)),
        )
        known = {f.name for f in dataclasses.fields(SolveOptions)}
        sv = doc.get("solver", {})
        unknown = set(sv) - known
        if unknown:
            raise ScenarioError(f"unknown solver options: {sorted(unknown)}")
        solver = SolveOptions(**sv)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(str(exc)) from exc
    scn = Scenario(
        network_path=_path(base, doc["network"]),
        horizon=horizon,
        objective=objective,
        signal=signal,
        solver=solver,
        output=Path(doc.get("output", "out")),
        demand_path=_path(base, doc["demand"]) if doc.get("demand") else None,
        regime=doc.get("regime"),
        density_links={str(k): [str(c) for c in v] for k, v in (doc.get("density_links") or {}).items()},
        source=source,
    )
    return scn.with_(**overrides) if overrides else scn


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("sodta") / "data" / name))


def bundled_scenario(**overrides) -> Scenario:
    return load_scenario(bundled_path("paper-like.scn"), **overrides)
