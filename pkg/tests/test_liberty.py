"""Test the liberty reader and NLDM lookups."""

from __future__ import annotations

import pytest

from deskpd.boolexpr import Not, Var, evaluate, parse_function, variables
from deskpd.errors import MissingTable, ParseError
from deskpd.liberty import NldmTable, parse_liberty
from deskpd.sta import interpolate_nldm


def _library(cell_body: str, time_unit: str = "1ns", cap_unit: str = "pf") -> str:
    return f"""library (t) {{
  time_unit : "{time_unit}" ;
  capacitive_load_unit (1, {cap_unit}) ;
  cell (C) {{
{cell_body}
  }}
}}
"""


class TestToyLibrary:
    """Test the bundled toy5 liberty data."""

    def test_library_attributes(self, tech) -> None:
        """Test units, voltage and default limits."""
        library = tech.liberty
        assert library.name == "toy5"
        assert library.nom_voltage == 1.0
        assert library.default_max_transition == pytest.approx(0.5)
        assert tech.nominal_voltage == 1.0
        assert len(library.cells) == 18

    def test_table_lookup(self, tech) -> None:
        """Test grid hits, interpolation and clamping on INVX1 cell_rise."""
        arc = tech.master("INVX1").timing.pins["Y"].timing[0]
        table = arc.cell_rise
        assert table.lookup(0.05, 5.0) == pytest.approx(0.045)
        assert table.lookup(0.05, 12.5) == pytest.approx(0.075)
        assert interpolate_nldm(table, 0.05, 1000.0) == pytest.approx(1.305)
        assert table.nominal == pytest.approx(0.105)
        assert arc.unate == "negative_unate"

    def test_sequential_cell(self, tech) -> None:
        """Test flip-flop recognition and constraint values."""
        dff = tech.master("DFFX1").timing
        assert dff.is_sequential
        assert dff.clock_pin() == "CK"
        setup, hold = dff.pins["D"].timing
        assert setup.is_setup and setup.constraint_value() == pytest.approx(0.05)
        assert not hold.is_setup and hold.constraint_value() == pytest.approx(0.02)
        assert [a.timing_type for a in dff.delay_arcs()] == ["rising_edge"]

    def test_pin_data(self, tech) -> None:
        """Test pin capacitance, limits and leakage."""
        inv = tech.master("INVX1").timing
        assert inv.pins["A"].capacitance == pytest.approx(1.5)
        assert inv.pins["Y"].max_capacitance == pytest.approx(80.0)
        assert inv.leakage == pytest.approx(0.01)
        assert inv.pins["Y"].function == Not(Var("A"))
        assert inv.pins["Y"].internal_power[0].energy(0.05, 5.0) > 0


class TestLibertyUnits:
    """Test unit scaling and malformed input."""

    def test_picosecond_and_picofarad_units(self) -> None:
        """Test that values are normalized to ns and fF."""
        library = parse_liberty(
            _library(
                """    pin (A) { direction : input ; capacitance : 0.002 ; }
    pin (Y) {
      direction : output ;
      function : "A" ;
      timing () {
        related_pin : "A" ;
        cell_rise (scalar) { values ("100") ; }
        cell_fall (scalar) { values ("80") ; }
        rise_transition (scalar) { values ("20") ; }
        fall_transition (scalar) { values ("20") ; }
      }
    }""",
                time_unit="1ps",
            )
        )
        cell = library.cells["C"]
        assert cell.pins["A"].capacitance == pytest.approx(2.0)
        arc = cell.pins["Y"].timing[0]
        assert arc.delay(True, 0.1, 3.0) == pytest.approx(0.1)
        assert arc.delay(False, 0.1, 3.0) == pytest.approx(0.08)
        assert cell.is_buffer

    def test_missing_delay_table(self) -> None:
        """Test that a delay arc without all four tables raises MissingTable."""
        text = _library(
            """    pin (A) { direction : input ; }
    pin (Y) {
      direction : output ;
      timing () {
        related_pin : "A" ;
        cell_rise (scalar) { values ("1") ; }
      }
    }"""
        )
        with pytest.raises(MissingTable):
            parse_liberty(text, "bad.lib")

    def test_unbalanced_braces(self) -> None:
        """Test that unbalanced groups report a line number."""
        with pytest.raises(ParseError) as exc:
            parse_liberty("library (x) {\n  cell (C) {\n", "bad.lib")
        assert exc.value.line is not None

    def test_descending_axis_rejected(self) -> None:
        """Test that table axes must ascend."""
        with pytest.raises(ParseError):
            NldmTable((0.2, 0.1), (1.0,), ((1.0,), (2.0,)))

    def test_unknown_capacitance_unit(self) -> None:
        """Test that an unknown capacitive load unit is a parse error."""
        text = _library("    pin (A) { direction : input ; }", cap_unit="xf")
        with pytest.raises(ParseError, match="capacitance unit"):
            parse_liberty(text, "bad.lib")


class TestBooleanFunctions:
    """Test liberty function expressions."""

    @pytest.mark.parametrize(
        ("text", "values", "expected"),
        [
            ("A & B", {"A": True, "B": False}, False),
            ("A | B", {"A": False, "B": True}, True),
            ("!(A B)", {"A": True, "B": True}, False),
            ("A ^ B", {"A": True, "B": True}, False),
            ("(A*B)+C'", {"A": False, "B": True, "C": False}, True),
        ],
    )
    def test_evaluate(self, text: str, values: dict, expected: bool) -> None:
        """Test operator parsing and evaluation."""
        assert evaluate(parse_function(text), values) is expected

    def test_variables(self) -> None:
        """Test variable extraction."""
        assert set(variables(parse_function("!((A0&S)|(A1&!S))"))) == {"A0", "A1", "S"}

    def test_bad_expression(self) -> None:
        """Test that a malformed expression raises ParseError."""
        with pytest.raises(ParseError):
            parse_function("A & (B")
