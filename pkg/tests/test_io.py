"""Network and demand text formats."""

import pytest

from sodta.demand import DemandProfile
from sodta.io import (
    FormatError, dumps_demand, dumps_network, loads_demand, loads_network, read_network,
    write_network,
)
from sodta.network import Cell, CellKind, build_chain_network, make_connectors, Network
from sodta.scenario import bundled_path


class TestNetworkFormat:
    def test_round_trip_paper(self, paper_net):
        assert loads_network(dumps_network(paper_net)) == paper_net

    def test_round_trip_corridor(self, corridor_net):
        assert loads_network(dumps_network(corridor_net)) == corridor_net

    def test_file_round_trip(self, tmp_path):
        net = build_chain_network(4)
        write_network(net, tmp_path / "chain.net")
        assert read_network(tmp_path / "chain.net") == net

    def test_bundled_file_is_the_builder_output(self, paper_net):
        assert read_network(bundled_path("paper_network.net")) == paper_net

    def test_profiles_survive(self):
        cells = [
            Cell("R", CellKind.SOURCE, 152.4, 15.24, 0.5, 12.0, 1.0),
            Cell("1", CellKind.ORDINARY, 152.4, 15.24, 0.5, 6.0, 18.0, capacity_profile=(6.0, 0.1)),
            Cell("S", CellKind.SINK, 152.4, 15.24, 0.5, 1.0, 1.0),
        ]
        net = Network(cells, make_connectors(cells, [("R", "1"), ("1", "S")]), name="p")
        assert loads_network(dumps_network(net)).cell("1").Q(2) == 0.1

    def test_bad_magic(self):
        with pytest.raises(FormatError):
            loads_network("not a network\n")


class TestDemandFormat:
    def test_round_trip(self):
        p = DemandProfile(3, {"R1": [1.5, 0, 2], "R2": [0, 0, 1e-3]})
        assert loads_demand(dumps_demand(p)).entries == p.entries

    def test_malformed(self):
        with pytest.raises(FormatError):
            loads_demand("slot R1\n1 2 3\n")
