"""Test the SDC subset reader."""

from __future__ import annotations

import pytest

from deskpd.errors import ParseError, UnknownPin, UnsupportedCommand
from deskpd.sdc import parse_sdc

BUS_V = """module top (clk, a, b, y);
  input clk, a, b;
  output y;
  NAND2X1 u (.A(a), .B(b), .Y(y));
endmodule
"""


class TestParse:
    """Test command parsing."""

    def test_bundled_constraints(self, bench, bench_sdc) -> None:
        """Test the bundled bench50 constraints."""
        design = bench("bench50")
        sdc = bench_sdc("bench50", design)
        clock = sdc.clock("clk")
        assert clock.period == 2.0
        assert clock.source == "clk"
        assert clock.waveform == (0.0, 1.0)
        assert clock.frequency_hz == pytest.approx(5e8)
        assert "clk" not in sdc.input_delays
        assert sdc.input_delays["in0"].max == pytest.approx(0.2)
        assert sdc.input_delays["in0"].clock == "clk"
        assert set(sdc.output_delays) == {f"out{i}" for i in range(8)}
        assert sdc.loads["out3"] == 5.0
        assert sdc.input_transitions["in7"] == pytest.approx(0.05)
        assert sdc.max_transition == pytest.approx(0.5)

    def test_min_max_delays(self, make_design) -> None:
        """Test separate -min and -max values on one port."""
        design = make_design(BUS_V)
        sdc = parse_sdc(
            """create_clock -period 5 -name core [get_ports clk]
set_input_delay 1.0 -max -clock core [get_ports a]
set_input_delay 0.3 -min -clock core [get_ports a]
"""
        ).resolve(design)
        delay = sdc.input_delays["a"]
        assert (delay.max, delay.min) == (pytest.approx(1.0), pytest.approx(0.3))

    def test_wildcards_and_continuation(self, make_design) -> None:
        """Test glob patterns, braces and backslash continuations."""
        design = make_design(BUS_V)
        sdc = parse_sdc(
            "create_clock -period 2 [get_ports clk]\n"
            "set_load 3 \\\n  [get_ports {y}]\n"
            "set_input_transition 0.1 [get_ports {a b}]\n"
            "set_input_delay 0.2 -clock clk [get_ports ?]\n"
        ).resolve(design)
        assert sdc.clocks[0].name == "clk"
        assert sdc.loads == {"y": 3.0}
        assert sdc.input_transitions == {"a": 0.1, "b": 0.1}
        assert set(sdc.input_delays) == {"a", "b", "y"}

    def test_clock_uncertainty(self) -> None:
        """Test setup and hold uncertainty."""
        sdc = parse_sdc(
            "create_clock -name clk -period 2 [get_ports clk]\n"
            "set_clock_uncertainty -setup 0.1 [get_clocks clk]\n"
            "set_clock_uncertainty -hold 0.05 [get_clocks clk]\n"
        )
        clock = sdc.clock("clk")
        assert clock.setup_uncertainty == pytest.approx(0.1)
        assert clock.hold_uncertainty == pytest.approx(0.05)


class TestErrors:
    """Test SDC error handling."""

    def test_unsupported_command(self) -> None:
        """Test that commands outside the subset raise UnsupportedCommand."""
        with pytest.raises(UnsupportedCommand) as exc:
            parse_sdc("create_clock -period 2 [get_ports clk]\nset_false_path -from a\n")
        assert exc.value.command == "set_false_path"
        assert exc.value.line == 2

    def test_non_positive_period(self) -> None:
        """Test that a zero period is rejected with a line number."""
        with pytest.raises(ParseError) as exc:
            parse_sdc("\ncreate_clock -period 0 [get_ports clk]\n")
        assert exc.value.line == 2

    def test_unknown_port(self, make_design) -> None:
        """Test that references to unknown ports fail on resolve."""
        design = make_design(BUS_V)
        sdc = parse_sdc("create_clock -period 2 [get_ports clk]\nset_load 1 [get_ports nope]\n")
        with pytest.raises(UnknownPin):
            sdc.resolve(design)
