"""Cell taxonomy, connector classification, validation and the bundled network."""

import pytest

from sodta.network import (
    CELL_LENGTH, FREE_FLOW_SPEED, PAPER_LINKS, SLOT_SECONDS, Cell, CellKind, Connector,
    ConnectorKind, Intersection, Network, NotFoundError, Phase, build_chain_network,
    classify_connector, derive_connector_kind, make_connectors, validate_network,
)

R, S, O = CellKind.SOURCE, CellKind.SINK, CellKind.ORDINARY


def _cell(cid, kind, q=6.0, n=18.0, inter=None):
    return Cell(cid, kind, CELL_LENGTH, FREE_FLOW_SPEED, 0.5, q, n, inter)


def two_cell_chain():
    cells = [_cell("R", R, 12.0), _cell("S", S, 1.0)]
    return Network(cells, make_connectors(cells, [("R", "S")]))


class TestValidation:
    def test_minimal_chain_passes(self):
        report = validate_network(two_cell_chain())
        assert report.ok
        assert report.diagnostics == []

    def test_source_with_predecessor(self):
        cells = [_cell("R", R), _cell("1", O), _cell("S", S)]
        cons = [
            Connector("R", "1", ConnectorKind.SOURCE),
            Connector("1", "S", ConnectorKind.SINK),
            Connector("1", "R", ConnectorKind.ORDINARY),
        ]
        report = validate_network(Network(cells, cons))
        assert not report.ok
        assert any(d.startswith("source has predecessor") for d in report.diagnostics)

    def test_bundled_network_passes(self, paper_net):
        report = validate_network(paper_net)
        assert report.diagnostics == []

    def test_stored_kind_mismatch_is_reported(self):
        cells = [_cell("R", R), _cell("1", O), _cell("S", S)]
        cons = [Connector("R", "1", ConnectorKind.ORDINARY), Connector("1", "S", ConnectorKind.SINK)]
        report = validate_network(Network(cells, cons))
        assert any("stored as O" in d for d in report.diagnostics)

    def test_unreachable_cell(self):
        cells = [_cell("R", R), _cell("1", O), _cell("2", O), _cell("S", S)]
        cons = make_connectors(cells, [("R", "1"), ("1", "S"), ("2", "S")])
        report = validate_network(Network(cells, cons))
        assert not report.ok

    def test_parameter_ranges(self):
        bad = Cell("1", O, CELL_LENGTH, FREE_FLOW_SPEED, 1.5, -1.0, 18.0)
        cells = [_cell("R", R), bad, _cell("S", S)]
        report = validate_network(Network(cells, make_connectors(cells, [("R", "1"), ("1", "S")])))
        text = " ".join(report.diagnostics)
        assert "negative capacity" in text and "delta" in text

    def test_conflicting_movements_in_one_phase(self, corridor_net):
        phases = [Phase(1, "I1", frozenset({("101", "3"), ("102", "3")})), Phase(2, "I1", frozenset())]
        net = Network(
            corridor_net.cells, corridor_net.connectors, corridor_net.intersections,
            phases, corridor_net.conflicts,
        )
        assert not validate_network(net).ok

    def test_pairing_with_missing_phase(self, corridor_net):
        inters = [Intersection("I1", (1, 2), ((1, 5),), (1, 2))]
        net = Network(
            corridor_net.cells, corridor_net.connectors, inters,
            corridor_net.phases, corridor_net.conflicts,
        )
        assert not validate_network(net).ok


class TestClassification:
    def test_source_connector(self, paper_net):
        assert classify_connector(paper_net, "R1", "1") is ConnectorKind.SOURCE

    def test_merge_connector(self, paper_net):
        # cell 11 collects links 22, 23 and 24 away from any intersection
        assert classify_connector(paper_net, "22", "11") is ConnectorKind.MERGE

    @pytest.mark.parametrize("cell", ["102", "202", "109", "209", "104", "204", "107", "207"])
    def test_intersection_cells_feed_intersection_merges(self, paper_net, cell):
        (succ,) = paper_net.successors(cell)
        assert classify_connector(paper_net, cell, succ) is ConnectorKind.INTERSECTION_MERGE

    def test_diverge_and_sink(self, paper_net):
        assert classify_connector(paper_net, "2", "3") is ConnectorKind.DIVERGE
        assert classify_connector(paper_net, "11", "S") is ConnectorKind.SINK

    def test_unknown_connector(self, paper_net):
        with pytest.raises(NotFoundError):
            classify_connector(paper_net, "1", "S")

    def test_stored_kind_agrees_with_derivation(self, paper_net):
        for con in paper_net.connectors:
            assert derive_connector_kind(paper_net, *con.key) is classify_connector(paper_net, *con.key)


class TestBundledNetwork:
    def test_counts(self, paper_net):
        assert len(paper_net.cells) == 35
        assert [c.id for c in paper_net.sources] == ["R1", "R2"]
        assert [c.id for c in paper_net.sinks] == ["S"]
        assert {i.id for i in paper_net.intersections} == {"I1", "I2"}

    def test_wide_cell(self, paper_net):
        c = paper_net.cell("1")
        assert (c.capacity, c.jam_capacity) == (12.0, 36.0)

    @pytest.mark.parametrize("cid", ["1", "2", "5", "6", "7", "11"])
    def test_table_wide_cells(self, paper_net, cid):
        c = paper_net.cell(cid)
        assert (c.Q(1), c.N(1)) == (12.0, 36.0)

    def test_intersection_cell_parameters(self, paper_net):
        c = paper_net.cell("102")
        assert (c.Q(1), c.N(1), c.kind) == (6.0, 18.0, CellKind.INTERSECTION)

    def test_road_parameters(self, paper_net):
        for c in paper_net.cells:
            if c.is_road:
                assert c.delta == 0.5
                assert c.free_flow_speed == 15.24
                assert c.length == 152.4

    def test_cell_length_matches_one_slot_of_travel(self):
        assert FREE_FLOW_SPEED * SLOT_SECONDS == pytest.approx(CELL_LENGTH, abs=1e-12)

    def test_phase_membership(self, paper_net):
        phase1 = {a for p in paper_net.phases if p.id == 1 for a, _ in p.movements}
        phase2 = {a for p in paper_net.phases if p.id == 2 for a, _ in p.movements}
        assert phase1 == {"102", "109", "202", "209"}
        assert phase2 == {"104", "107", "204", "207"}

    def test_sigma_inverts_movements(self, paper_net):
        for con in paper_net.signalized_connectors():
            phases = paper_net.sigma(*con.key)
            assert len(phases) == 1
            iid, pid = phases[0]
            assert con.key in paper_net.phase(iid, pid).movements

    def test_degree_sums_equal_connector_count(self, paper_net):
        n_out = sum(len(paper_net.successors(c.id)) for c in paper_net.cells)
        n_in = sum(len(paper_net.predecessors(c.id)) for c in paper_net.cells)
        assert n_out == n_in == len(paper_net.connectors)

    def test_links_are_paths(self, paper_net):
        for cells in PAPER_LINKS.values():
            for a, b in zip(cells, cells[1:]):
                assert b in paper_net.successors(a)

    def test_source_and_sink_storage_unbounded(self, paper_net):
        assert paper_net.cell("R1").N(1) == float("inf")
        assert paper_net.cell("S").N(1) == float("inf")


class TestCell:
    def test_profile_override(self):
        c = Cell("1", O, CELL_LENGTH, FREE_FLOW_SPEED, 0.5, 6.0, 18.0, capacity_profile=(6.0, 3.0))
        assert c.Q(1) == 6.0 and c.Q(2) == 3.0
        assert c.N(2) == 18.0

    def test_chain_builder(self):
        net = build_chain_network(3)
        assert [c.id for c in net.cells] == ["R", "1", "2", "3", "S"]
        assert validate_network(net).ok
