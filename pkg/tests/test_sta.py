"""Test static timing analysis against closed-form constant-delay arithmetic."""

from __future__ import annotations

import random

import networkx as nx
import pytest

from deskpd.db import Point, resize_instance
from deskpd.errors import CombinationalLoop, NoClock
from deskpd.sta import (
    FALL,
    RISE,
    build_timing_graph,
    drv_violations,
    format_timing_report,
    incremental_update,
    propagate,
    report_paths,
    timing_summary,
)


RECONVERGENT_V = """module dag (clk, a, b, y);
  input clk, a, b;
  output y;
  wire n1, n2, n3, n4, n5, n6, n7;
  BUFX1 u1 (.A(a), .Y(n1));
  INVX1 u2 (.A(n1), .Y(n2));
  AND2X1 u3 (.A(n1), .B(n2), .Y(n3));
  BUFX1 u4 (.A(b), .Y(n4));
  AND2X1 u5 (.A(n3), .B(n4), .Y(n5));
  INVX1 u6 (.A(n5), .Y(n6));
  AND2X1 u7 (.A(n6), .B(n3), .Y(n7));
  DFFX1 ff (.D(n7), .CK(clk), .Q(y));
endmodule
"""

RECONVERGENT_SDC = """create_clock -name clk -period 2 [get_ports clk]
set_input_delay 0.5 -clock clk [get_ports {a b}]
set_output_delay 0.4 -clock clk [get_ports y]
"""


class TestClosedForm:
    """Test arrivals, requireds and slacks on a three-cell pipeline."""

    def test_setup(self, pipeline) -> None:
        """Test setup arrival, required and slack at both endpoints."""
        graph = pipeline()
        d = graph.vertex("ff0/D")
        assert d.arr_late[RISE] == pytest.approx(0.6)
        assert d.req_late[RISE] == pytest.approx(1.95)
        assert d.setup_slack() == pytest.approx(1.35)
        y = graph.vertex("y")
        assert y.arr_late[RISE] == pytest.approx(0.5)
        assert y.req_late[RISE] == pytest.approx(1.6)
        assert y.setup_slack() == pytest.approx(1.1)

    def test_hold(self, pipeline) -> None:
        """Test hold slack at both endpoints."""
        graph = pipeline()
        assert graph.vertex("ff0/D").hold_slack() == pytest.approx(0.58)
        assert graph.vertex("y").hold_slack() == pytest.approx(0.9)

    def test_summary(self, pipeline) -> None:
        """Test WNS, TNS and endpoint accounting."""
        summary = timing_summary(pipeline())
        assert summary.wns == pytest.approx(1.1)
        assert summary.tns == 0
        assert summary.hold_wns == pytest.approx(0.58)
        assert summary.endpoints == 2
        assert summary.unconstrained == []
        assert set(summary.endpoint_slack) == {"ff0/D", "y"}

    def test_ideal_clock(self, pipeline) -> None:
        """Test that an unbuffered clock network is ideal."""
        graph = pipeline()
        assert graph.ideal_clock
        assert graph.vertex("ff0/CK").arr_late[RISE] == 0.0

    def test_setup_uncertainty(self, pipeline) -> None:
        """Test that setup uncertainty tightens every required time."""
        graph = pipeline("set_clock_uncertainty -setup 0.1 [get_clocks clk]\n")
        assert timing_summary(graph).wns == pytest.approx(1.0)

    def test_missing_output_delay(self, pipeline) -> None:
        """Test that an output without a delay is reported unconstrained."""
        graph = pipeline(
            sdc="create_clock -name clk -period 2 [get_ports clk]\n"
            "set_input_delay 0.5 -clock clk [get_ports a]\n"
        )
        summary = timing_summary(graph)
        assert summary.unconstrained == ["y"]
        assert summary.endpoints == 1


class TestReports:
    """Test path reports."""

    def test_worst_setup_path(self, pipeline) -> None:
        """Test the stage breakdown of the worst setup path."""
        (path,) = report_paths(pipeline(), k=1)
        assert path.endpoint == "y"
        assert path.startpoint == "ff0/CK"
        assert [s.pin for s in path.stages] == ["ff0/CK", "ff0/Q", "u2/A", "u2/Y", "y"]
        assert [s.arrival for s in path.stages] == pytest.approx([0.0, 0.3, 0.3, 0.5, 0.5])
        assert path.slack == pytest.approx(1.1)
        assert path.capture_edge == 2.0

    def test_worst_hold_path(self, pipeline) -> None:
        """Test that hold reports start at the input port."""
        paths = report_paths(pipeline(), k=5, mode="hold")
        assert [p.endpoint for p in paths] == ["ff0/D", "y"]
        assert paths[0].startpoint == "a"
        assert paths[0].slack == pytest.approx(0.58)

    def test_text_report(self, pipeline) -> None:
        """Test the fixed-column text layout."""
        graph = pipeline()
        text = format_timing_report(report_paths(graph, k=2), timing_summary(graph))
        assert text.startswith("wns 1.1000  tns 0.0000")
        assert "Startpoint: ff0/CK" in text
        assert "Endpoint:   ff0/D" in text
        assert text.count("slack") == 2

    def test_max_capacitance(self, pipeline) -> None:
        """Test capacitance violations on cell-driven nets."""
        graph = pipeline("set_max_capacitance 0.5 [current_design]\n")
        found = {(v.net, v.kind) for v in drv_violations(graph)}
        assert found == {("n1", "cap"), ("q0", "cap")}


class TestIncremental:
    """Test incremental re-timing."""

    def test_resize_retimes_cone_only(self, pipeline, const_tech) -> None:
        """Test that a resize updates its fanout cone and leaves other endpoints alone."""
        graph = pipeline()
        design = graph.design
        resize_instance(design, design.instance("u1"), const_tech.master("BUFX2"))
        incremental_update(graph, ["u1/Y"])
        assert graph.vertex("ff0/D").arr_late[RISE] == pytest.approx(0.58)
        assert graph.vertex("ff0/D").setup_slack() == pytest.approx(1.37)
        assert "ff0/D" in graph.recomputed
        assert "y" not in graph.recomputed

    def test_matches_full_propagation(self, placed_bench50, bench_sdc) -> None:
        """Test that moving a cell and updating incrementally equals a fresh analysis."""
        design = placed_bench50
        sdc = bench_sdc("bench50", design)
        graph = propagate(build_timing_graph(design, sdc))
        inst = design.instances[len(design.instances) // 2]
        inst.location = Point(inst.location.x + design.site_width() * 3, inst.location.y)
        incremental_update(graph, [])
        fresh = propagate(build_timing_graph(design, sdc))
        for vertex in fresh.vertices:
            old = graph.vertex(vertex.name)
            assert old.arr_late == pytest.approx(vertex.arr_late)
            assert old.req_late == pytest.approx(vertex.req_late)
            assert old.arr_early == pytest.approx(vertex.arr_early)
        ours, theirs = timing_summary(graph), timing_summary(fresh)
        assert ours.wns == pytest.approx(theirs.wns)
        assert ours.tns == pytest.approx(theirs.tns)
        assert ours.endpoints == theirs.endpoints

    def test_random_edits_match_full_propagation(self, placed_bench50, bench_sdc) -> None:
        """Test that a hundred moves and resizes keep incremental timing exactly equal."""
        design = placed_bench50
        sdc = bench_sdc("bench50", design)
        graph = propagate(build_timing_graph(design, sdc))
        rng = random.Random(7)
        cells = sorted(
            (i for i in design.instances if i.master.timing is not None and i.is_movable),
            key=lambda i: i.name,
        )
        step = design.site_width()
        for edit in range(1, 101):
            inst = rng.choice(cells)
            others = [m for m in design.tech.size_variants(inst.master) if m is not inst.master]
            if others and rng.random() < 0.5:
                resize_instance(design, inst, rng.choice(others))
            else:
                dx = rng.randint(-4, 4) * step
                inst.location = Point(inst.location.x + dx, inst.location.y)
            incremental_update(graph, [f"{inst.name}/{pin}" for pin in inst.master.pins])
            if edit % 10:
                continue
            fresh = propagate(build_timing_graph(design, sdc))
            for vertex in fresh.vertices:
                old = graph.vertex(vertex.name)
                assert old.arr_late == vertex.arr_late, (edit, vertex.name)
                assert old.arr_early == vertex.arr_early, (edit, vertex.name)
                assert old.req_late == vertex.req_late, (edit, vertex.name)
                assert old.req_early == vertex.req_early, (edit, vertex.name)
                assert old.slew_late == vertex.slew_late, (edit, vertex.name)

    def test_arrivals_equal_longest_path(self, make_design, make_sdc, const_tech) -> None:
        """Test late arrivals against explicit enumeration of every path."""
        design = make_design(RECONVERGENT_V, const_tech)
        graph = propagate(build_timing_graph(design, make_sdc(RECONVERGENT_SDC, design)))
        paths = nx.DiGraph()
        for edge in graph.edges:
            if edge.late is None:
                continue
            for tin, tout in edge.pairs():
                paths.add_edge(
                    (edge.src.name, tin), (edge.dst.name, tout), delay=edge.late[tin][tout][0]
                )
        checked = 0
        for vertex in graph.vertices:
            for t in (RISE, FALL):
                node = (vertex.name, t)
                if node not in paths or paths.in_degree(node) == 0:
                    continue
                starts = [n for n in nx.ancestors(paths, node) if paths.in_degree(n) == 0]
                longest = max(
                    graph.vertex(s[0]).arr_late[s[1]] + nx.path_weight(paths, p, "delay")
                    for s in starts
                    for p in nx.all_simple_paths(paths, s, node)
                )
                assert vertex.arr_late[t] == pytest.approx(longest), node
                checked += 1
        assert checked > 20
        assert graph.vertex("ff/D").arr_late[RISE] == pytest.approx(1.45)
        assert graph.vertex("ff/D").arr_late[FALL] == pytest.approx(1.45)


class TestGraphErrors:
    """Test graph construction failures."""

    def test_loop(self, make_design, make_sdc) -> None:
        """Test that a combinational cycle is reported with its pins."""
        design = make_design(
            """module ring (clk, y);
  input clk;
  output y;
  wire n1, n2;
  INVX1 u1 (.A(n2), .Y(n1));
  INVX1 u2 (.A(n1), .Y(n2));
  BUFX1 u3 (.A(n1), .Y(y));
endmodule
"""
        )
        with pytest.raises(CombinationalLoop):
            build_timing_graph(
                design, make_sdc("create_clock -name clk -period 1 [get_ports clk]\n", design)
            )

    def test_no_clock(self, pipeline, make_sdc) -> None:
        """Test that timing needs a clock."""
        design = pipeline().design
        with pytest.raises(NoClock):
            build_timing_graph(design, make_sdc("set_input_delay 0.5 [get_ports a]\n", design))
