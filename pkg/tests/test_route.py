"""Test the global router: grid, planar routing, layer assignment, guides and wires."""

from __future__ import annotations

import itertools
import random

import numpy as np
import pytest

from deskpd.db import Blockage, BlockageKind, NetPin, Point, Rect
from deskpd.errors import ConfigError, PreconditionViolated, Unroutable
from deskpd.evaluate import congestion_map
from deskpd.floorplan import gen_pdn
from deskpd.models import PdnSpec, RouterConfig
from deskpd.route import (
    NetRoute,
    PlanarRoute,
    RouteGrid,
    RoutePin,
    RouteTopology,
    Segment,
    _layer_cost,
    build_route_grid,
    emit_guides,
    gen_topology,
    global_route,
    layer_assign,
    planar_route,
    segments_of,
    track_assign,
    write_guides,
)
from deskpd.steiner import rsmt


def _grid(tech, nx: int, ny: int, capacity: int = 1) -> RouteGrid:
    """Unobstructed grid over metal2..metal5 with the same capacity on every layer edge."""
    gcell = tech.gcell_size()
    layers = [tech.layer(f"metal{i}") for i in range(2, 6)]
    extent = Rect.of(0, 0, nx * gcell, ny * gcell)
    caps, tracks = [], []
    for layer in layers:
        shape = (nx - 1, ny) if layer.is_horizontal else (nx, ny - 1)
        caps.append(np.full(shape, capacity, dtype=np.int64))
        hi = extent.ur.y if layer.is_horizontal else extent.ur.x
        tracks.append(np.array(layer.tracks(0, 0, hi), dtype=np.int64))
    h_cap = sum(c for c, layer in zip(caps, layers) if layer.is_horizontal)
    v_cap = sum(c for c, layer in zip(caps, layers) if not layer.is_horizontal)
    return RouteGrid(
        extent=extent,
        gcell=gcell,
        nx=nx,
        ny=ny,
        layers=layers,
        layer_capacity=caps,
        layer_demand=[np.zeros_like(c) for c in caps],
        tracks=tracks,
        h_capacity=h_cap,
        v_capacity=v_cap,
        h_demand=np.zeros_like(h_cap),
        v_demand=np.zeros_like(v_cap),
        h_history=np.zeros(h_cap.shape),
        v_history=np.zeros(v_cap.shape),
    )


def _edges(cells):
    keys = set()
    for (x1, y1), (x2, y2) in zip(cells, cells[1:]):
        keys.add(("h", min(x1, x2), y1) if y1 == y2 else ("v", x1, min(y1, y2)))
    return keys


def _staircase(rng: random.Random, count: int):
    """GCells of a monotone path with ``count`` alternating straight runs."""
    x, y = 1, 1
    cells = [(x, y)]
    horizontal = rng.random() < 0.5
    for _ in range(count):
        for _ in range(rng.randint(1, 3)):
            x, y = (x + 1, y) if horizontal else (x, y + 1)
            cells.append((x, y))
        horizontal = not horizontal
    return cells


def _topology(name: str, pins):
    return RouteTopology(name, 0, pins, rsmt(p.cell for p in pins))


def _pin(k: int, cell, layer: int = 1) -> RoutePin:
    return RoutePin(NetPin(None, f"p{k}"), Point(0, 0), cell, layer)


class TestRouteGrid:
    """Test the GCell resource grid."""

    def test_capacity_shape(self, placed_bench50) -> None:
        """Test grid dimensions and non-negative capacities."""
        grid = build_route_grid(placed_bench50)
        die = placed_bench50.die
        assert grid.nx * grid.gcell >= die.width
        assert grid.ny * grid.gcell >= die.height
        assert grid.h_capacity.shape == (grid.nx - 1, grid.ny)
        assert grid.v_capacity.shape == (grid.nx, grid.ny - 1)
        assert grid.total_capacity > 0
        assert (grid.h_capacity >= 0).all() and (grid.v_capacity >= 0).all()
        assert [layer.name for layer in grid.layers] == ["metal2", "metal3", "metal4", "metal5"]

    def test_layer_window_empty(self, placed_bench50) -> None:
        """Test that an inverted layer range is a configuration error."""
        with pytest.raises(ConfigError):
            build_route_grid(
                placed_bench50, cfg=RouterConfig(min_layer="metal5", max_layer="metal2")
            )

    def test_layer_window_one_direction(self, placed_bench50) -> None:
        """Test that a window without both directions is a configuration error."""
        with pytest.raises(ConfigError, match="horizontal and a vertical"):
            build_route_grid(
                placed_bench50, cfg=RouterConfig(min_layer="metal4", max_layer="metal4")
            )

    def test_fifteen_tracks_per_gcell(self, floorplanned) -> None:
        """Test that a full GCell of an unobstructed pitch-200 layer holds fifteen tracks."""
        grid = build_route_grid(floorplanned("bench50"))
        assert grid.gcell == 15 * 200
        names = [layer.name for layer in grid.layers]
        metal2 = grid.layer_capacity[names.index("metal2")]
        metal3 = grid.layer_capacity[names.index("metal3")]
        assert (metal2[: grid.nx - 1, :] == 15).all()
        assert (metal3[:, : grid.ny - 1] == 15).all()

    def test_blocked_edge_has_no_capacity(self, floorplanned) -> None:
        """Test that an edge fully under a routing obstruction loses every track."""
        design = floorplanned("bench50")
        clear = build_route_grid(design)
        g, ll = clear.gcell, clear.extent.ll
        assert clear.nx >= 4 and clear.ny >= 3
        cover = Rect(
            Point(ll.x + g - 500, ll.y + g - 500), Point(ll.x + 3 * g + 500, ll.y + 2 * g + 500)
        )
        design.blockages.append(Blockage(BlockageKind.ROUTING, cover))
        blocked = build_route_grid(design)
        assert clear.h_capacity[1, 1] > 0
        assert blocked.h_capacity[1, 1] == 0
        assert blocked.h_capacity[2, 1] == 0
        assert blocked.total_capacity < clear.total_capacity

    def test_wider_stripes_cost_capacity(self, floorplanned) -> None:
        """Test that routing capacity falls as power stripes widen."""
        totals = []
        for width in (0.4, 1.2, 2.4):
            design = floorplanned("bench50")
            gen_pdn(design, PdnSpec(stripe_pitch_um=10.0, stripe_width_um=width))
            totals.append(build_route_grid(design).total_capacity)
        assert totals[0] > totals[1] > totals[2]


class TestSegments:
    """Test planar edge grouping."""

    def test_runs(self) -> None:
        """Test that consecutive edges merge into maximal runs."""
        edges = {("h", 0, 0), ("h", 1, 0), ("h", 3, 0), ("v", 2, 0)}
        assert segments_of(edges) == [
            Segment("h", 0, 0, 2),
            Segment("h", 0, 3, 4),
            Segment("v", 2, 0, 1),
        ]


class TestPlanarRoute:
    """Test pattern routing, maze detours and negotiation on small grids."""

    def test_detour_around_blocked_edge(self, tech) -> None:
        """Test that a blocked edge costs exactly one GCell of detour each way."""
        grid = _grid(tech, 5, 3)
        grid.h_capacity[:] = 1
        grid.v_capacity[:] = 1
        grid.h_capacity[2, 1] = 0
        topology = _topology("n", [_pin(0, (0, 1)), _pin(1, (4, 1))])
        routes, _ = planar_route(grid, [topology])
        edges = routes["n"].edges
        assert ("h", 2, 1) not in edges
        assert len(edges) == 4 + 2 * 1
        assert grid.total_overflow() == 0

    def test_two_nets_share_capacity_one(self, tech) -> None:
        """Test that two nets contending for one track end up on disjoint edges."""
        grid = _grid(tech, 3, 3)
        grid.h_capacity[:] = 1
        grid.v_capacity[:] = 1
        topologies = [
            RouteTopology(name, k, [], rsmt([(0, 1), (2, 1)])) for k, name in enumerate("ab")
        ]
        routes, _ = planar_route(grid, topologies)
        assert grid.total_overflow() == 0
        assert not routes["a"].edges & routes["b"].edges
        for route in routes.values():
            assert {route.paths[0][0], route.paths[0][-1]} == {(0, 1), (2, 1)}


class TestLayerAssign:
    """Test the per-net layer assignment DP against brute force."""

    def _assign(self, grid, cells, pins) -> NetRoute:
        edges = _edges(cells)
        planar = {"n": PlanarRoute("n", [cells], edges)}
        return layer_assign(grid, planar, [_topology("n", pins)])["n"]

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_exhaustive_search(self, tech, seed) -> None:
        """Test that the DP cost equals the best of every layer combination."""
        rng = random.Random(seed)
        grid = _grid(tech, 12, 12)
        for cap in grid.layer_capacity:
            cap[:] = np.array([rng.randint(1, 6) for _ in range(cap.size)]).reshape(cap.shape)
        cells = _staircase(rng, rng.randint(1, 6))
        pins = [_pin(0, cells[0]), _pin(1, cells[-1], rng.choice([1, 2]))]
        pins.append(_pin(2, rng.choice(cells), rng.choice([1, 2, 3])))
        segments = segments_of(_edges(cells))
        index = [layer.index for layer in grid.layers]
        pins_of = {}
        for pin in pins:
            for s, segment in enumerate(segments):
                if segment.contains(pin.cell):
                    pins_of.setdefault(s, []).append(pin)
                    break
        links = [
            (s, t)
            for s, t in itertools.combinations(range(len(segments)), 2)
            if segments[s].touches(segments[t])
        ]
        table = {
            (s, k): _layer_cost(grid, k, segment)[0]
            for s, segment in enumerate(segments)
            for k, layer in enumerate(grid.layers)
            if layer.is_horizontal == (segment.direction == "h")
        }

        def cost(assignment) -> float:
            total = sum(table[(s, k)] for s, k in enumerate(assignment))
            total += sum(abs(index[assignment[s]] - index[assignment[t]]) for s, t in links)
            for s, group in pins_of.items():
                total += sum(abs(index[assignment[s]] - pin.layer) for pin in group)
            return total

        options = [[k for (t, k) in table if t == s] for s in range(len(segments))]
        best = min(cost(combo) for combo in itertools.product(*options))
        route = self._assign(grid, cells, pins)
        assert len(route.segments) == len(segments)
        assert cost([segment.layer for segment in route.segments]) == pytest.approx(best)

    @pytest.mark.parametrize("count", [2, 4, 6])
    def test_staircase_needs_a_via_per_bend(self, tech, count) -> None:
        """Test that a path with k alternating runs needs at least k - 1 vias."""
        grid = _grid(tech, 12, 12, capacity=4)
        cells = _staircase(random.Random(count), count)
        route = self._assign(grid, cells, [_pin(0, cells[0]), _pin(1, cells[-1])])
        assert len(route.segments) == count
        assert route.vias >= count - 1

    def test_single_segment_vias(self, tech) -> None:
        """Test that one horizontal run between metal1 pins sits on metal3 with two stacks."""
        grid = _grid(tech, 6, 4, capacity=4)
        cells = [(1, 1), (2, 1), (3, 1)]
        route = self._assign(grid, cells, [_pin(0, cells[0]), _pin(1, cells[-1])])
        assert [grid.layers[s.layer].name for s in route.segments] == ["metal3"]
        assert route.vias == 2 * (3 - 1)


class TestTrackAssign:
    """Test interval scheduling inside one panel."""

    def test_overlapping_segments_get_distinct_tracks(self, tech) -> None:
        """Test that k mutually overlapping segments use at least k tracks."""
        grid = _grid(tech, 6, 4)
        metal3 = [layer.name for layer in grid.layers].index("metal3")
        routes = {
            f"n{i}": NetRoute(f"n{i}", [Segment("h", 2, 0, 3 + i, layer=metal3)])
            for i in range(4)
        }
        result = track_assign(grid, routes)
        tracks = {r.segments[0].track for r in routes.values()}
        assert result.overflow == 0
        assert len(tracks) >= 4
        span = grid.gcell_rect((0, 2))
        assert all(span.ll.y <= t < span.ur.y for t in tracks)

    def test_disjoint_segments_share_a_track(self, tech) -> None:
        """Test that segments with disjoint spans reuse the same track."""
        grid = _grid(tech, 6, 4)
        metal3 = [layer.name for layer in grid.layers].index("metal3")
        routes = {
            "a": NetRoute("a", [Segment("h", 2, 0, 2, layer=metal3)]),
            "b": NetRoute("b", [Segment("h", 2, 3, 5, layer=metal3)]),
        }
        result = track_assign(grid, routes)
        assert result.overflow == 0
        assert routes["a"].segments[0].track == routes["b"].segments[0].track


class TestGlobalRoute:
    """Test the full routing pipeline on a placed benchmark."""

    def test_routes_every_multi_pin_net(self, placed_bench50) -> None:
        """Test that each routed net gets axis-parallel wires and guides."""
        result = global_route(placed_bench50)
        assert result.grid.total_overflow() == 0
        multi = [n.name for n in placed_bench50.nets if len(n.pins) >= 2]
        assert sorted(result.routes) == sorted(multi)
        for name, route in result.routes.items():
            net = placed_bench50.net(name)
            assert net.wires
            for wire in net.wires:
                assert wire.start.x == wire.end.x or wire.start.y == wire.end.y
            assert result.guides[name]
            for segment in route.segments:
                assert segment.track is not None
        assert result.wirelength > 0

    def test_deterministic(self, floorplanned) -> None:
        """Test that two identical runs write identical wires."""
        from deskpd.legalize import legalize
        from deskpd.models import PlacerConfig
        from deskpd.place import global_place

        wires = []
        for _ in range(2):
            design = floorplanned("bench50")
            global_place(design, PlacerConfig(max_iterations=50, spread_iterations=10, seed=7))
            legalize(design)
            global_route(design, RouterConfig(max_rounds=5))
            wires.append([(n.name, n.wires, n.vias) for n in design.nets])
        assert wires[0] == wires[1]

    def test_guide_text(self, placed_bench50) -> None:
        """Test the guide file layout."""
        result = global_route(placed_bench50)
        text = write_guides(result.guides)
        lines = text.splitlines()
        name = sorted(result.guides)[0]
        assert lines[0] == name
        assert lines[1] == "("
        fields = lines[2].split()
        assert len(fields) == 5 and fields[4].startswith("metal")
        assert lines.count("(") == len(result.guides)

    def test_requires_placement(self, floorplanned) -> None:
        """Test that unplaced instances block routing."""
        with pytest.raises(PreconditionViolated):
            global_route(floorplanned("bench50"))

    def test_unroutable_reports_hotspots(self, placed_bench50) -> None:
        """Test that a grid without capacity fails with an overflow count and hotspot map."""
        grid = build_route_grid(placed_bench50)
        grid.h_capacity[:] = 0
        grid.v_capacity[:] = 0
        topologies = [gen_topology(placed_bench50, net, grid) for net in placed_bench50.nets]
        topologies = [t for t in topologies if t.length > 0]
        with pytest.raises(Unroutable) as caught:
            planar_route(grid, topologies, RouterConfig(max_rounds=1))
        assert caught.value.overflow > 0
        assert caught.value.hotspots is not None


class TestRouteStages:
    """Test layer assignment, guides and track assignment on a routed benchmark."""

    def test_layer_directions(self, placed_bench50) -> None:
        """Test that every segment sits on a layer of its own direction."""
        result = global_route(placed_bench50)
        for route in result.routes.values():
            for segment in route.segments:
                layer = result.grid.layers[segment.layer]
                assert layer.is_horizontal == (segment.direction == "h")

    def test_guides_reproduce(self, placed_bench50) -> None:
        """Test that guides are a pure function of the routes."""
        result = global_route(placed_bench50)
        assert emit_guides(result.grid, result.routes) == result.guides

    def test_tracks_on_layer_grid(self, placed_bench50) -> None:
        """Test that assigned tracks fall inside their GCell row or column and are stable."""
        result = global_route(placed_bench50)
        assigned = {}
        for name, route in result.routes.items():
            for s, segment in enumerate(route.segments):
                if segment.direction == "h":
                    span = result.grid.gcell_rect((0, segment.line))
                    assert span.ll.y <= segment.track <= span.ur.y
                else:
                    span = result.grid.gcell_rect((segment.line, 0))
                    assert span.ll.x <= segment.track <= span.ur.x
                assigned[(name, s)] = segment.track
        again = track_assign(result.grid, result.routes)
        assert again.panels == result.tracks.panels
        assert again.overflow == result.tracks.overflow
        for (name, s), track in assigned.items():
            assert result.routes[name].segments[s].track == track

    def test_congestion_after_routing(self, placed_bench50) -> None:
        """Test that a clean route never exceeds capacity on any GCell."""
        result = global_route(placed_bench50)
        usage = congestion_map(result.grid)
        assert usage.values.shape == (result.grid.nx, result.grid.ny)
        assert usage.values.max() <= 1.0
        assert usage.values.max() > 0.0
