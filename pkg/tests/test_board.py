from __future__ import annotations

import math

import pytest

from blockwire.board import (
    BoardLayout,
    BoardSettings,
    Placement,
    RoutingGrid,
    UnplacedInstanceError,
    bfs_path,
    build_grid,
    compose_board,
    export_board_svg,
    place,
    placed_rect,
    ratsnest,
    route,
    transform_pad,
)
from blockwire.composer import compose_schematic
from blockwire.diagnostics import Kind
from blockwire.engine import new_design

from .conftest import build_thermostat
from .oracles import bfs_shortest_len, exhaustive_mst_weight


class TestGeometry:
    def test_rotation_swaps_extent(self, library):
        fp = library.get_block("ht16k33").footprint  # 20 x 15
        assert placed_rect(fp, Placement(0, 0, 0)) == (0, 0, 20, 15)
        assert placed_rect(fp, Placement(0, 0, 90)) == (0, 0, 15, 20)
        assert placed_rect(fp, Placement(5, 5, 270)) == (5, 5, 20, 25)

    def test_pad_transform_round_trips_extent(self, library):
        fp = library.get_block("ht16k33").footprint
        for rot in (0, 90, 180, 270):
            placement = Placement(10, 10, rot)
            x0, y0, x1, y1 = placed_rect(fp, placement)
            for pad in fp.pads:
                x, y = transform_pad(fp, placement, pad.x_mm, pad.y_mm)
                assert x0 - 1e-9 <= x <= x1 + 1e-9
                assert y0 - 1e-9 <= y <= y1 + 1e-9

    def test_rot_must_be_quarter_turn(self):
        with pytest.raises(ValueError):
            Placement(0, 0, 45)


class TestPlace:
    def _layout(self, library):
        blocks = {"a": library.get_block("atmega328"), "b": library.get_block("atmega328")}
        return BoardLayout(board=BoardSettings(100, 100, 0.5), blocks=blocks)

    def test_out_of_bounds(self, library):
        layout = self._layout(library)
        diags = place(layout, "a", 95.0, 95.0)  # 10x10 block would fit; 20x20 does not
        assert [d.kind for d in diags] == [Kind.BOUNDARY_VIOLATION]

    def test_in_bounds_clean(self, library):
        layout = self._layout(library)
        assert place(layout, "a", 0.0, 0.0) == []

    def test_overlap(self, library):
        layout = self._layout(library)
        place(layout, "a", 0.0, 0.0)
        diags = place(layout, "b", 5.0, 5.0)
        assert [d.kind for d in diags] == [Kind.OVERLAP]

    def test_edge_sharing_is_not_overlap(self, library):
        layout = self._layout(library)
        place(layout, "a", 0.0, 0.0)
        assert place(layout, "b", 20.0, 0.0) == []


class TestRatsnest:
    def test_mst_of_three_pads(self, library):
        # Net pads at (0,0), (10,0), (10,5): the MST keeps the two short legs.
        d = new_design(library)
        jack = d.add_instance("dc_jack").instance_id
        d.set_supply(jack, 9000)
        reg = d.add_instance("reg_5v", jack).instance_id
        reg2 = d.add_instance("reg_3v3", reg).instance_id  # nested regulator
        d.place(jack, 0.0, 50.0)
        d.place(reg, 30.0, 50.0)
        d.place(reg2, 60.0, 50.0)
        netlist = compose_schematic(d)
        links = ratsnest(d, netlist)
        gnd_links = [l for l in links if l.net_name == "GND"]
        assert len(gnd_links) == 2  # 3 pads -> 2 MST edges

    def test_tree_edge_count_per_net(self, library):
        d, _ = build_thermostat(library)
        netlist = compose_schematic(d)
        links = ratsnest(d, netlist)
        by_net: dict[str, int] = {}
        for link in links:
            by_net[link.net_name] = by_net.get(link.net_name, 0) + 1
        for net, pins in netlist.nets.items():
            pads = len(_pads_of(d, netlist, net))
            expected = max(0, pads - 1)
            assert by_net.get(net, 0) == expected, net

    def test_mst_weight_matches_bruteforce(self, library):
        d, _ = build_thermostat(library)
        netlist = compose_schematic(d)
        links = ratsnest(d, netlist)
        for net in netlist.nets:
            pads = _pads_of(d, netlist, net)
            if not 2 <= len(pads) <= 5:
                continue
            weight = sum(l.length_mm for l in links if l.net_name == net)
            oracle = exhaustive_mst_weight([(p.x_mm, p.y_mm) for p in pads])
            assert math.isclose(weight, oracle, rel_tol=1e-9), net

    def test_single_pad_net_has_no_links(self, library):
        d, ids = build_thermostat(library)
        netlist = compose_schematic(d)
        links = ratsnest(d, netlist)
        # The sensor's unwired optional ALERT pin stays block-local with one pin.
        local_nets = [n for n, pins in netlist.nets.items() if len(pins) == 1]
        for net in local_nets:
            assert not [l for l in links if l.net_name == net]

    def test_unplaced_instance_raises(self, library):
        d, ids = build_thermostat(library)
        d.placements.pop(ids["led"])
        netlist = compose_schematic(d)
        with pytest.raises(UnplacedInstanceError):
            ratsnest(d, netlist)


def _pads_of(design, netlist, net):
    from blockwire.board import pad_sites

    return pad_sites(design, net, netlist)


class TestRoute:
    def test_straight_line_on_empty_board(self):
        grid = RoutingGrid(BoardSettings(20, 20, 0.5))
        path = bfs_path(grid, (0, 0), (10, 0), "N", set())
        assert path is not None and len(path) == 11
        assert path[0] == (0, 0) and path[-1] == (10, 0)

    def test_detour_through_gap_matches_oracle(self):
        grid = RoutingGrid(BoardSettings(20, 20, 0.5))
        # Wall across x=10 except a one-cell gap at row 30.
        for r in range(0, 41):
            if r != 30:
                grid.keepout.add((20, r))
        path = bfs_path(grid, (10, 10), (30, 10), "N", set())
        oracle = bfs_shortest_len(grid.cols, grid.rows, grid.keepout, (10, 10), (30, 10))
        assert path is not None and len(path) - 1 == oracle

    def test_enclosed_pad_is_unroutable(self):
        grid = RoutingGrid(BoardSettings(20, 20, 0.5))
        for dc, dr in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            grid.keepout.add((10 + dc, 10 + dr))
        path = bfs_path(grid, (10, 10), (30, 30), "N", set())
        assert path is None

    def test_routes_avoid_block_interiors(self, library):
        d, _ = build_thermostat(library)
        netlist = compose_schematic(d)
        result = compose_board(d, netlist)
        assert result.tracks, "expected at least one routed track"
        grid = build_grid(d, netlist)
        for track in result.tracks:
            for cell in track.points[1:-1]:
                assert cell not in grid.keepout, (track.net_name, cell)

    def test_same_layer_tracks_are_cell_disjoint(self, library):
        d, _ = build_thermostat(library)
        netlist = compose_schematic(d)
        result = compose_board(d, netlist)
        for layer in ("TOP", "BOTTOM"):
            owner: dict[tuple[int, int], str] = {}
            for track in result.tracks:
                if track.layer != layer:
                    continue
                for cell in track.points:
                    assert owner.setdefault(cell, track.net_name) == track.net_name, (layer, cell)

    def test_link_lengths_match_sequential_bfs_oracle(self, library):
        """Replay the router's ordering with an independent BFS per link."""
        d, _ = build_thermostat(library)
        netlist = compose_schematic(d)
        links = ratsnest(d, netlist)
        grid = build_grid(d, netlist)
        tracks, diags = route(grid, links)
        by_subject = {l.subject: l for l in links}
        ordered = sorted(links, key=lambda l: (l.length_mm, l.net_name, l.pad_a.pad_id, l.pad_b.pad_id))
        failed = {x.subject for x in diags}
        occupied = {"TOP": {}, "BOTTOM": {}}
        track_iter = iter(tracks)
        for link in ordered:
            if link.subject in failed:
                continue
            track = next(track_iter)
            start = grid.snap(link.pad_a.x_mm, link.pad_a.y_mm)
            goal = grid.snap(link.pad_b.x_mm, link.pad_b.y_mm)
            best = None
            for layer in ("TOP", "BOTTOM"):
                blocked = {
                    c
                    for c in grid.keepout
                    if c not in (start, goal)
                } | {
                    c
                    for c, owners in grid.pad_cells.items()
                    if link.net_name not in owners and c not in (start, goal)
                } | {
                    c
                    for c, net in occupied[layer].items()
                    if net != link.net_name and c not in (start, goal)
                }
                n = bfs_shortest_len(grid.cols, grid.rows, blocked, start, goal)
                if n is not None:
                    best = n
                    break
            assert best is not None
            assert len(track.points) - 1 == best, link.subject
            for cell in track.points:
                occupied[track.layer][cell] = link.net_name

    def test_bottom_layer_used_when_top_is_blocked(self):
        grid = RoutingGrid(BoardSettings(10, 10, 0.5))
        from blockwire.board import PadSite, RatsnestLink

        # A spans the full width at y=2, B the full height at x=5; they must
        # cross, and neither can detour, so B ends up on the bottom layer.
        link_a = RatsnestLink("A", PadSite("a/1/0", "x", "1", 0, 2), PadSite("a/1/1", "x", "1", 10, 2))
        link_b = RatsnestLink("B", PadSite("b/1/0", "y", "1", 5, 0), PadSite("b/1/1", "y", "1", 5, 10))
        tracks, diags = route(grid, [link_a, link_b])
        assert not diags
        assert [(t.net_name, t.layer) for t in tracks] == [("A", "TOP"), ("B", "BOTTOM")]


class TestSvg:
    def test_empty_board_outline_only(self, library):
        d = new_design(library)
        netlist = compose_schematic(d)
        svg = export_board_svg(d, netlist, [])
        assert svg.startswith("<svg") and svg.count("<rect") == 1

    def test_one_bordered_rect_per_placed_block(self, library):
        d, _ = build_thermostat(library)
        netlist = compose_schematic(d)
        result = compose_board(d, netlist)
        assert result.svg.count('stroke="#ffffff"') == len(d.placements)

    def test_byte_stable_across_runs(self, library):
        d, _ = build_thermostat(library)
        netlist = compose_schematic(d)
        a = compose_board(d, netlist).svg
        b = compose_board(d, netlist).svg
        assert a.encode() == b.encode()
