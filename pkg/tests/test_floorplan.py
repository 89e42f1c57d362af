"""Test floorplan initialization, IO placement, macros and the power grid."""

from __future__ import annotations

import pytest

from deskpd.db import BlockageKind, Orientation, PlacementStatus, Point, Rect, validate
from deskpd.errors import (
    PreconditionViolated,
    SpecInfeasible,
    TooManyPorts,
    UtilizationInfeasible,
)
from deskpd.floorplan import (
    gen_pdn,
    init_floorplan,
    load_preplacement,
    place_io_pins,
    place_macros,
    port_edge,
)
from deskpd.models import FloorplanSpec, PdnSpec
from deskpd.route import build_route_grid

CHAIN_V = """module chain (a, y);
  input a;
  output y;
  wire n1, n2;
  INVX1 u1 (.A(a), .Y(n1));
  NAND2X1 u2 (.A(n1), .B(a), .Y(n2));
  BUFX1 u3 (.A(n2), .Y(y));
endmodule
"""

MACRO_V = """module soc (clk, we, a0, d0, q0);
  input clk, we, a0, d0;
  output q0;
  wire n1;
  RAM16X4 ram (.CLK(clk), .WE(we), .A0(a0), .D0(d0), .Q0(n1));
  BUFX1 u1 (.A(n1), .Y(q0));
endmodule
"""


class TestInitFloorplan:
    """Test core sizing and row creation."""

    def test_rows_fill_core(self, make_design) -> None:
        """Test core size, margins and alternating row orientation."""
        design = make_design(CHAIN_V)
        init_floorplan(design, FloorplanSpec(utilization=0.5, margin_um=2.0))
        assert design.core == Rect.of(2000, 2000, 5000, 6000)
        assert design.die == Rect.of(0, 0, 7000, 8000)
        assert [row.orient for row in design.rows] == [Orientation.N, Orientation.FS]
        assert all(row.count == 15 for row in design.rows)
        assert design.rows[1].origin == Point(2000, 4000)

    def test_utilization_is_respected(self, bench) -> None:
        """Test that achieved utilization does not exceed the target."""
        design = bench("bench300")
        init_floorplan(design, FloorplanSpec(utilization=0.7, aspect_ratio=0.5))
        cells = sum(i.master.area for i in design.instances)
        assert cells / design.core.area <= 0.7 + 1e-9
        assert design.core.height <= design.core.width

    def test_second_call_rejected(self, make_design) -> None:
        """Test that rows may only be created once."""
        design = make_design(CHAIN_V)
        init_floorplan(design, FloorplanSpec())
        with pytest.raises(PreconditionViolated):
            init_floorplan(design, FloorplanSpec())

    def test_macro_does_not_fit(self, make_design) -> None:
        """Test that a macro wider than the core is infeasible."""
        design = make_design(MACRO_V)
        with pytest.raises(UtilizationInfeasible):
            init_floorplan(design, FloorplanSpec(utilization=0.9, aspect_ratio=4.0))


class TestIoPins:
    """Test IO pin placement."""

    def test_pins_on_boundary_tracks(self, floorplanned) -> None:
        """Test that every port sits on the die edge, on a track, at a unique slot."""
        design = floorplanned("bench50")
        tech = design.tech
        seen = set()
        for port in design.ports:
            loc = port.location
            assert port.status == PlacementStatus.FIXED
            edge = port_edge(design, loc)
            layer = tech.layer(port.layer)
            if edge in ("left", "right"):
                assert port.layer == "metal3"
                assert layer.on_track(design.die.ll.y, loc.y)
            else:
                assert port.layer == "metal2"
                assert layer.on_track(design.die.ll.x, loc.x)
            assert loc not in seen
            seen.add(loc)

    def test_explicit_order_starts_clockwise(self, make_design) -> None:
        """Test that the first ordered port lands on the left edge and the order is clockwise."""
        design = make_design(CHAIN_V)
        init_floorplan(design, FloorplanSpec(utilization=0.5, margin_um=2.0))
        place_io_pins(design, ["y", "a"])
        assert port_edge(design, design.port("y").location) == "left"
        assert port_edge(design, design.port("a").location) == "right"

    def test_too_many_ports(self, make_design) -> None:
        """Test that more ports than boundary slots is an error."""
        names = [f"i{k}" for k in range(25)]
        design = make_design(
            f"module wide ({', '.join(names)}, y);\n  input {', '.join(names)};\n  output y;\n"
            "  INVX1 u (.A(i0), .Y(y));\nendmodule\n"
        )
        init_floorplan(design, FloorplanSpec(utilization=0.5, margin_um=0.0))
        design.die = Rect.of(0, 0, 1000, 1000)
        with pytest.raises(TooManyPorts):
            place_io_pins(design)

    def test_requires_floorplan(self, make_design) -> None:
        """Test the precondition on rows."""
        with pytest.raises(PreconditionViolated):
            place_io_pins(make_design(CHAIN_V))


class TestMacrosAndPreplacement:
    """Test macro packing and pre-placement."""

    def test_macro_packed_fixed_inside_core(self, make_design) -> None:
        """Test that the macro is fixed inside the core with a placement blockage."""
        design = make_design(MACRO_V)
        init_floorplan(design, FloorplanSpec(utilization=0.3, margin_um=5.0))
        place_io_pins(design)
        place_macros(design)
        ram = design.instance("ram")
        assert ram.is_fixed
        assert design.core.contains(ram.bbox)
        assert (ram.location.x - design.core.ll.x) % design.site_width() == 0
        assert (ram.location.y - design.core.ll.y) % design.row_height() == 0
        blockages = [b for b in design.blockages if b.kind == BlockageKind.PLACEMENT]
        assert len(blockages) == 1
        assert blockages[0].rect.contains(ram.bbox)

    def test_macro_routing_halo(self, make_design) -> None:
        """Test that each obstructed layer gets a one-GCell routing halo the router honours."""
        design = make_design(MACRO_V)
        init_floorplan(design, FloorplanSpec(utilization=0.3, margin_um=5.0))
        place_io_pins(design)
        place_macros(design)
        ram = design.instance("ram")
        halo = ram.bbox.expanded(design.tech.gcell_size()).clipped(design.die)
        routing = [b for b in design.blockages if b.kind == BlockageKind.ROUTING]
        assert sorted(b.layer for b in routing) == ["metal1", "metal2", "metal3"]
        assert all(b.rect == halo for b in routing)
        with_halo = build_route_grid(design).total_capacity
        design.blockages = [b for b in design.blockages if b.kind != BlockageKind.ROUTING]
        assert with_halo < build_route_grid(design).total_capacity

    def test_preplacement(self, make_design) -> None:
        """Test that pre-placed components become FIXED and unknown ones warn."""
        design = make_design(CHAIN_V)
        init_floorplan(design, FloorplanSpec(utilization=0.5, margin_um=2.0))
        fragment = """DESIGN chain ;
UNITS DISTANCE MICRONS 1000 ;
COMPONENTS 2 ;
  - u2 NAND2X1 + PLACED ( 2400 2000 ) N ;
  - ghost INVX1 + PLACED ( 2000 2000 ) N ;
END COMPONENTS
END DESIGN
"""
        load_preplacement(design, fragment)
        u2 = design.instance("u2")
        assert u2.status == PlacementStatus.FIXED
        assert u2.location == Point(2400, 2000)
        assert any("ghost" in w for w in design.warnings)
        assert not validate(design)


class TestPowerGrid:
    """Test PDN generation."""

    def test_rails_and_stripes(self, floorplanned) -> None:
        """Test follow-pin rails, stripe alternation and via drops."""
        design = floorplanned("bench50")
        gen_pdn(design, PdnSpec(stripe_pitch_um=10.0, stripe_width_um=1.0))
        vdd, vss = design.special_net("VDD"), design.special_net("VSS")
        rails = [w for net in (vdd, vss) for w in net.wires if w.layer == "metal1"]
        assert len(rails) == len(design.rows) + 1
        assert any(w.start.y == design.core.ll.y for w in vss.wires if w.layer == "metal1")
        stripes = [w for w in vdd.wires if w.layer == "metal4"]
        assert stripes and all(w.start.x == w.end.x for w in stripes)
        assert all(w.width == 1000 for w in stripes)
        assert vdd.vias and vss.vias

    def test_width_not_below_pitch(self, floorplanned) -> None:
        """Test that stripes wider than their pitch are infeasible."""
        with pytest.raises(SpecInfeasible):
            gen_pdn(floorplanned("bench50"), PdnSpec(stripe_width_um=5.0, stripe_pitch_um=5.0))

    def test_unknown_layer(self, floorplanned) -> None:
        """Test that unknown PDN layers are infeasible."""
        with pytest.raises(SpecInfeasible):
            gen_pdn(floorplanned("bench50"), PdnSpec(vertical_layer="metal9"))
