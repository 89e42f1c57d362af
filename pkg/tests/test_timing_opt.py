"""Test design-rule, setup and hold repair."""

from __future__ import annotations

import pytest

from deskpd.errors import NoBufferMaster, UnfixableViolation
from deskpd.floorplan import init_floorplan, place_io_pins
from deskpd.legalize import check_placement, legalize
from deskpd.models import FloorplanSpec, OptConfig, PlacerConfig
from deskpd.place import global_place
from deskpd.sta import build_timing_graph, drv_violations, propagate, timing_summary
from deskpd.timing_opt import fix_drv, fix_hold, fix_setup

FANOUT = 60

FANOUT_V = (
    f"module fan (a, {', '.join(f'y{k}' for k in range(FANOUT))});\n"
    "  input a;\n"
    f"  output {', '.join(f'y{k}' for k in range(FANOUT))};\n"
    "  wire n0;\n"
    "  BUFX1 drv (.A(a), .Y(n0));\n"
    + "".join(f"  INVX1 u{k} (.A(n0), .Y(y{k}));\n" for k in range(FANOUT))
    + "endmodule\n"
)

TIGHT_SDC = """create_clock -name clk -period 0.4 [get_ports clk]
set_input_delay 0.05 -clock clk [all_inputs]
set_output_delay 0.05 -clock clk [all_outputs]
"""


def _place(design, utilization: float = 0.5):
    init_floorplan(design, FloorplanSpec(utilization=utilization, margin_um=5.0))
    place_io_pins(design)
    global_place(design, PlacerConfig(max_iterations=50, spread_iterations=10, seed=5))
    legalize(design)
    return design


def _fresh_wns(graph) -> float:
    return timing_summary(propagate(build_timing_graph(graph.design, graph.sdc))).wns


@pytest.fixture
def placed_pipeline(pipeline):
    graph = pipeline()
    design = _place(graph.design, utilization=0.05)
    return propagate(build_timing_graph(design, graph.sdc))


class TestFixDrv:
    """Test capacitance and slew repair by load splitting."""

    def test_splits_overloaded_net(self, make_design, make_sdc) -> None:
        """Test that a 60-load net is split under the driver's max capacitance."""
        design = _place(make_design(FANOUT_V))
        sdc = make_sdc("create_clock -name clk -period 2\n", design)
        graph = propagate(build_timing_graph(design, sdc))
        assert any(v.net == "n0" and v.kind == "cap" for v in drv_violations(graph))
        report = fix_drv(design, graph)
        assert report.buffers_inserted >= 2
        assert report.after < report.before
        assert not any(v.kind == "cap" for v in drv_violations(graph))
        assert check_placement(design) == []
        assert all(i.is_placed for i in design.instances)

    def test_single_load_unfixable(self, placed_pipeline) -> None:
        """Test that a lone load above the limit cannot be fixed by splitting."""
        graph = placed_pipeline
        graph.sdc.max_capacitance = 0.5
        propagate(graph)
        with pytest.raises(UnfixableViolation):
            fix_drv(graph.design, graph)

    def test_buffer_must_be_a_buffer(self, placed_pipeline) -> None:
        """Test that an inverter is refused as the repair buffer."""
        with pytest.raises(NoBufferMaster):
            fix_drv(placed_pipeline.design, placed_pipeline, OptConfig(buffer="INVX1"))


class TestFixSetup:
    """Test greedy setup repair."""

    def test_wns_never_degrades(self, placed_bench50, make_sdc) -> None:
        """Test a monotone trajectory, legal placement and agreement with a fresh analysis."""
        design = placed_bench50
        graph = propagate(build_timing_graph(design, make_sdc(TIGHT_SDC, design)))
        report = fix_setup(design, graph, OptConfig(setup_effort=10))
        assert report.after >= report.before
        assert report.trajectory == sorted(report.trajectory)
        assert check_placement(design) == []
        assert _fresh_wns(graph) == pytest.approx(report.after)

    def test_met_timing_is_untouched(self, placed_pipeline) -> None:
        """Test that positive slack needs no moves."""
        report = fix_setup(placed_pipeline.design, placed_pipeline)
        assert report.moves == 0
        assert report.before == report.after


class TestFixHold:
    """Test hold repair with delay buffers."""

    def test_reaches_margin(self, placed_pipeline) -> None:
        """Test that delay buffers lift the flop input above the hold margin."""
        graph = placed_pipeline
        report = fix_hold(graph.design, graph, OptConfig(hold_margin_ns=0.7))
        assert report.buffers_inserted >= 1
        assert graph.vertex("ff0/D").hold_slack() >= 0.7
        assert timing_summary(graph).wns >= 0
        assert any(i.name.startswith("hold_buf_") for i in graph.design.instances)
        assert check_placement(graph.design) == []

    def test_setup_budget_guard(self, placed_pipeline) -> None:
        """Test that hold fixing stops before setup fails and records why."""
        graph = placed_pipeline
        report = fix_hold(graph.design, graph, OptConfig(hold_margin_ns=2.0))
        assert "SetupBudgetExhausted ff0/D" in report.notes
        assert "SetupBudgetExhausted y: output port" in report.notes
        assert timing_summary(graph).wns >= 0
        assert _fresh_wns(graph) == pytest.approx(timing_summary(graph).wns)
