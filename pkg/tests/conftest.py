"""Test configuration and fixtures."""

from __future__ import annotations

from pathlib import Path
from typing import Callable, Optional

import pytest
import yaml

from deskpd.config import Settings
from deskpd.db import Design, TechLibrary
from deskpd.flow import FlowApp
from deskpd.floorplan import init_floorplan, place_io_pins
from deskpd.lef import parse_tech_lef
from deskpd.legalize import legalize
from deskpd.liberty import parse_liberty
from deskpd.models import FloorplanSpec, PlacerConfig
from deskpd.netlist import build_design, parse_netlist
from deskpd.place import global_place
from deskpd.sdc import SdcConstraints, parse_sdc

DATA_DIR = Path(__file__).resolve().parents[1] / "data"
TECH_LEF = DATA_DIR / "tech" / "toy5.lef"
LIBERTY = DATA_DIR / "tech" / "toy5.lib"
DESIGNS = DATA_DIR / "designs"


def _constant_cell(name: str, inputs: list, output: str, function: str, delay: float,
                   sense: str = "positive_unate") -> str:
    pins = "".join(
        f"    pin ({pin}) {{ direction : input ; capacitance : 1.0 ; }}\n" for pin in inputs
    )
    arcs = "".join(
        f"""      timing () {{
        related_pin : "{pin}" ;
        timing_sense : {sense} ;
        cell_rise (scalar) {{ values ("{delay}") ; }}
        cell_fall (scalar) {{ values ("{delay}") ; }}
        rise_transition (scalar) {{ values ("0.05") ; }}
        fall_transition (scalar) {{ values ("0.05") ; }}
      }}
"""
        for pin in inputs
    )
    return f"""  cell ({name}) {{
    area : 1.0 ;
    cell_leakage_power : 0.01 ;
{pins}    pin ({output}) {{
      direction : output ;
      function : "{function}" ;
{arcs}    }}
  }}
"""


# Every arc is a scalar, so path delays are sums of the constants below.
CONSTANT_LIBERTY = (
    """library (const) {
  time_unit : "1ns" ;
  leakage_power_unit : "1uW" ;
  capacitive_load_unit (1, ff) ;
  nom_voltage : 1.0 ;
"""
    + _constant_cell("BUFX1", ["A"], "Y", "A", 0.1)
    + _constant_cell("BUFX2", ["A"], "Y", "A", 0.08)
    + _constant_cell("INVX1", ["A"], "Y", "!A", 0.2, sense="negative_unate")
    + _constant_cell("AND2X1", ["A", "B"], "Y", "A&B", 0.15)
    + """  cell (DFFX1) {
    area : 4.0 ;
    cell_leakage_power : 0.05 ;
    ff (IQ, IQN) { next_state : "D" ; clocked_on : "CK" ; }
    pin (D) {
      direction : input ;
      capacitance : 1.0 ;
      timing () {
        related_pin : "CK" ;
        timing_type : setup_rising ;
        rise_constraint (scalar) { values ("0.05") ; }
        fall_constraint (scalar) { values ("0.05") ; }
      }
      timing () {
        related_pin : "CK" ;
        timing_type : hold_rising ;
        rise_constraint (scalar) { values ("0.02") ; }
        fall_constraint (scalar) { values ("0.02") ; }
      }
    }
    pin (CK) { direction : input ; capacitance : 1.0 ; clock : true ; }
    pin (Q) {
      direction : output ;
      function : "IQ" ;
      timing () {
        related_pin : "CK" ;
        timing_type : rising_edge ;
        cell_rise (scalar) { values ("0.3") ; }
        cell_fall (scalar) { values ("0.3") ; }
        rise_transition (scalar) { values ("0.05") ; }
        fall_transition (scalar) { values ("0.05") ; }
      }
    }
  }
}
"""
)

PIPELINE_V = """module pipe (clk, a, y);
  input clk, a;
  output y;
  wire n1, q0;
  BUFX1 u1 (.A(a), .Y(n1));
  DFFX1 ff0 (.D(n1), .CK(clk), .Q(q0));
  INVX1 u2 (.A(q0), .Y(y));
endmodule
"""

PIPELINE_SDC = """create_clock -name clk -period 2 [get_ports clk]
set_input_delay 0.5 -clock clk [get_ports a]
set_output_delay 0.4 -clock clk [get_ports y]
"""


@pytest.fixture(scope="session")
def tech() -> TechLibrary:
    """Toy 5-layer technology with its liberty view attached."""
    library = parse_tech_lef(TECH_LEF.read_text(encoding="utf-8"), str(TECH_LEF))
    library.attach_liberty(parse_liberty(LIBERTY.read_text(encoding="utf-8"), str(LIBERTY)))
    return library


@pytest.fixture
def const_tech() -> TechLibrary:
    """Toy LEF paired with constant-delay liberty data for closed-form timing checks."""
    library = parse_tech_lef(TECH_LEF.read_text(encoding="utf-8"), str(TECH_LEF))
    library.attach_liberty(parse_liberty(CONSTANT_LIBERTY, "const.lib"))
    return library


@pytest.fixture
def make_design(tech: TechLibrary) -> Callable[..., Design]:
    """Build an unplaced design from Verilog text."""

    def _make(verilog: str, library: Optional[TechLibrary] = None) -> Design:
        return build_design(library or tech, parse_netlist(verilog, "test.v"))

    return _make


@pytest.fixture
def make_sdc() -> Callable[[str, Design], SdcConstraints]:
    """Parse SDC text and bind it to a design."""

    def _make(text: str, design: Design) -> SdcConstraints:
        return parse_sdc(text, "test.sdc").resolve(design)

    return _make


@pytest.fixture
def bench(tech: TechLibrary) -> Callable[[str], Design]:
    """Load one of the bundled benchmarks (bench50, bench300, bench1k)."""

    def _load(name: str) -> Design:
        path = DESIGNS / f"{name}.v"
        return build_design(tech, parse_netlist(path.read_text(encoding="utf-8"), str(path)))

    return _load


@pytest.fixture
def bench_sdc() -> Callable[[str, Design], SdcConstraints]:
    def _load(name: str, design: Design) -> SdcConstraints:
        path = DESIGNS / f"{name}.sdc"
        return parse_sdc(path.read_text(encoding="utf-8"), str(path)).resolve(design)

    return _load


@pytest.fixture
def floorplanned(bench: Callable[[str], Design]) -> Callable[[str], Design]:
    """Benchmark with core, rows and IO pins but no cell placement."""

    def _make(name: str = "bench50") -> Design:
        design = bench(name)
        init_floorplan(design, FloorplanSpec(utilization=0.6, margin_um=5.0))
        place_io_pins(design)
        return design

    return _make


@pytest.fixture
def placed_bench50(floorplanned: Callable[[str], Design]) -> Design:
    """bench50 after global placement and legalization."""
    design = floorplanned("bench50")
    global_place(design, PlacerConfig(max_iterations=100, spread_iterations=20, seed=7))
    legalize(design)
    return design


@pytest.fixture
def flow_config_file(tmp_path: Path) -> Callable[..., Path]:
    """Write a flow YAML over the bundled files; keyword overrides are merged at top level."""

    def _write(design: str = "bench50", **overrides: object) -> Path:
        config = {
            "inputs": {
                "tech_lef": str(TECH_LEF),
                "liberty": str(LIBERTY),
                "netlist": str(DESIGNS / f"{design}.v"),
                "sdc": str(DESIGNS / f"{design}.sdc"),
            },
            "output_dir": str(tmp_path / "out"),
            "seed": 7,
            "clock_period_factor": 2.0,
            "svg": False,
            "floorplan": {"utilization": 0.6, "margin_um": 5.0},
            "placer": {"max_iterations": 100, "spread_iterations": 20, "detailed_passes": 2},
            "router": {"max_rounds": 5},
        }
        config.update(overrides)
        path = tmp_path / "flow.yaml"
        path.write_text(yaml.safe_dump(config), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def test_settings(flow_config_file: Callable[..., Path]) -> Settings:
    """Settings pointing at a temporary bench50 flow config."""
    return Settings(config_file=flow_config_file(), threads=2)


@pytest.fixture
async def app(test_settings: Settings) -> FlowApp:
    """Create and start a FlowApp instance for testing."""
    app = FlowApp(test_settings)
    await app.start()
    yield app
    await app.stop()


@pytest.fixture
def pipeline(make_design, make_sdc, const_tech):
    """Propagated timing graph of the constant-delay pipeline; ``extra`` SDC lines are appended."""
    from deskpd.sta import build_timing_graph, propagate

    def _build(extra: str = "", sdc: Optional[str] = None):
        design = make_design(PIPELINE_V, const_tech)
        sdc_text = (sdc or PIPELINE_SDC) + extra
        return propagate(build_timing_graph(design, make_sdc(sdc_text, design)))

    return _build
