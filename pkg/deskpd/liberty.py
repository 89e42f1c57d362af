"""Liberty reader: NLDM delay/slew/constraint tables, pin data, leakage and internal power.

Stored units: time ns, capacitance fF, leakage µW, internal energy fJ. Tables always come out as
``index_1`` = input slew (ns) and ``index_2`` = output load (fF), transposing templates declared the
other way round.
"""

from __future__ import annotations

import bisect
import logging
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .boolexpr import Expr, Not, Var, parse_function
from .errors import MissingTable, ParseError
from .lexer import TokenStream, tokenize

logger = logging.getLogger(__name__)

_DELAY_TABLES = ("cell_rise", "cell_fall", "rise_transition", "fall_transition")
_DELAY_TYPES = {"combinational", "rising_edge", "falling_edge"}
_SLEW_VARS = {"input_net_transition", "related_pin_transition", "constrained_pin_transition"}
_LOAD_VARS = {"total_output_net_capacitance"}


@dataclass(frozen=True)
class NldmTable:
    index_1: Tuple[float, ...]
    index_2: Tuple[float, ...]
    values: Tuple[Tuple[float, ...], ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(self.index_1) or any(
            len(r) != len(self.index_2) for r in self.values
        ):
            raise ParseError(
                f"table is {len(self.values)}x{len(self.values[0]) if self.values else 0}, "
                f"axes are {len(self.index_1)}x{len(self.index_2)}"
            )
        for axis in (self.index_1, self.index_2):
            if any(b <= a for a, b in zip(axis, axis[1:])):
                raise ParseError(f"table axis not strictly ascending: {axis}")

    @classmethod
    def scalar(cls, value: float) -> "NldmTable":
        return cls((0.0,), (0.0,), ((value,),))

    def lookup(self, slew: float, load: float) -> float:
        """Bilinear interpolation, clamped to the grid boundary."""
        i, u = _bracket(self.index_1, slew)
        j, v = _bracket(self.index_2, load)
        vals = self.values
        i2 = min(i + 1, len(self.index_1) - 1)
        j2 = min(j + 1, len(self.index_2) - 1)
        low = vals[i][j] + (vals[i][j2] - vals[i][j]) * v
        high = vals[i2][j] + (vals[i2][j2] - vals[i2][j]) * v
        return low + (high - low) * u

    @property
    def nominal(self) -> float:
        """Value at the middle grid indices."""
        return self.values[(len(self.index_1) - 1) // 2][(len(self.index_2) - 1) // 2]

    def scaled(self, axis_1: float, axis_2: float, values: float) -> "NldmTable":
        return NldmTable(
            tuple(x * axis_1 for x in self.index_1),
            tuple(x * axis_2 for x in self.index_2),
            tuple(tuple(x * values for x in row) for row in self.values),
        )


def _bracket(axis: Sequence[float], x: float) -> Tuple[int, float]:
    """Lower grid index and fractional position, clamped to the axis range."""
    if len(axis) == 1 or x <= axis[0]:
        return 0, 0.0
    if x >= axis[-1]:
        return len(axis) - 1, 0.0
    i = bisect.bisect_right(axis, x) - 1
    return i, (x - axis[i]) / (axis[i + 1] - axis[i])


@dataclass
class TimingArc:
    related_pin: str
    pin: str
    timing_type: str = "combinational"
    unate: str = "non_unate"
    cell_rise: Optional[NldmTable] = None
    cell_fall: Optional[NldmTable] = None
    rise_transition: Optional[NldmTable] = None
    fall_transition: Optional[NldmTable] = None
    rise_constraint: Optional[NldmTable] = None
    fall_constraint: Optional[NldmTable] = None

    @property
    def is_constraint(self) -> bool:
        return self.timing_type.startswith(("setup", "hold"))

    @property
    def is_setup(self) -> bool:
        return self.timing_type.startswith("setup")

    def constraint_value(self) -> float:
        values = [t.nominal for t in (self.rise_constraint, self.fall_constraint) if t is not None]
        return max(values) if values else 0.0

    def delay(self, rise: bool, slew: float, load: float) -> float:
        table = self.cell_rise if rise else self.cell_fall
        return table.lookup(slew, load) if table is not None else 0.0

    def transition(self, rise: bool, slew: float, load: float) -> float:
        table = self.rise_transition if rise else self.fall_transition
        return table.lookup(slew, load) if table is not None else 0.0


@dataclass
class InternalPower:
    pin: str
    related_pin: Optional[str]
    rise_power: Optional[NldmTable] = None
    fall_power: Optional[NldmTable] = None

    def energy(self, slew: float, load: float) -> float:
        """Mean energy (fJ) of one transition."""
        tables = [t for t in (self.rise_power, self.fall_power) if t is not None]
        if not tables:
            return 0.0
        return sum(t.lookup(slew, load) for t in tables) / len(tables)


@dataclass
class LibertyPin:
    name: str
    direction: str = "input"
    capacitance: float = 0.0
    function_text: Optional[str] = None
    function: Optional[Expr] = None
    is_clock: bool = False
    max_capacitance: Optional[float] = None
    max_transition: Optional[float] = None
    timing: List[TimingArc] = field(default_factory=list)
    internal_power: List[InternalPower] = field(default_factory=list)


@dataclass
class FlipFlop:
    clocked_on: str
    next_state: str


@dataclass
class LibertyCell:
    name: str
    area: float = 0.0
    leakage: Optional[float] = None
    pins: Dict[str, LibertyPin] = field(default_factory=dict)
    ff: Optional[FlipFlop] = None

    @property
    def is_sequential(self) -> bool:
        return self.ff is not None

    def _single_io(self) -> Optional[Tuple[LibertyPin, LibertyPin]]:
        inputs = [p for p in self.pins.values() if p.direction == "input"]
        outputs = [p for p in self.pins.values() if p.direction == "output"]
        if len(inputs) == 1 and len(outputs) == 1 and self.ff is None:
            return inputs[0], outputs[0]
        return None

    @property
    def is_buffer(self) -> bool:
        io = self._single_io()
        return io is not None and io[1].function == Var(io[0].name)

    @property
    def is_inverter(self) -> bool:
        io = self._single_io()
        return io is not None and io[1].function == Not(Var(io[0].name))

    def arcs(self) -> List[TimingArc]:
        return [arc for pin in self.pins.values() for arc in pin.timing]

    def delay_arcs(self) -> List[TimingArc]:
        return [arc for arc in self.arcs() if not arc.is_constraint]

    def clock_pin(self) -> Optional[str]:
        if self.ff is not None:
            return self.ff.clocked_on
        return next((p.name for p in self.pins.values() if p.is_clock), None)


@dataclass
class LibertyLibrary:
    name: str
    nom_voltage: float = 1.0
    default_max_transition: Optional[float] = None
    cells: Dict[str, LibertyCell] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Generic group syntax
# ---------------------------------------------------------------------------


@dataclass
class _Group:
    kind: str
    args: List[str]
    line: int
    simple: Dict[str, str] = field(default_factory=dict)
    complex: Dict[str, List[str]] = field(default_factory=dict)
    children: List["_Group"] = field(default_factory=list)

    def groups(self, kind: str) -> List["_Group"]:
        return [g for g in self.children if g.kind == kind]


def _parse_args(ts: TokenStream) -> List[str]:
    args: List[str] = []
    while not ts.accept(")"):
        tok = ts.next()
        if tok != ",":
            args.append(tok)
    return args


def _parse_body(ts: TokenStream, group: _Group) -> None:
    while not ts.accept("}"):
        line = ts.line or 0
        name = ts.next()
        if ts.accept(":"):
            parts = []
            while ts.peek() not in (";", "}", None):
                tok = ts.peek_token()
                # a newline ends an unterminated simple attribute
                if parts and tok is not None and tok.line != line:
                    break
                parts.append(ts.next())
            ts.accept(";")
            group.simple[name] = " ".join(parts)
        elif ts.accept("("):
            args = _parse_args(ts)
            if ts.accept("{"):
                child = _Group(name, args, line)
                _parse_body(ts, child)
                group.children.append(child)
            else:
                ts.accept(";")
                group.complex[name] = args
        else:
            raise ts.error(f"unexpected token '{name}'")


def _parse_groups(text: str, source: str) -> _Group:
    ts = TokenStream(
        tokenize(
            text, punctuation="{}();:,", line_comment="//", block_comments=True, source=source
        ),
        source,
    )
    root = _Group("root", [], 0)
    while not ts.at_end:
        line = ts.line or 0
        kind = ts.next()
        ts.expect("(")
        args = _parse_args(ts)
        ts.expect("{")
        group = _Group(kind, args, line)
        _parse_body(ts, group)
        root.children.append(group)
    return root


# ---------------------------------------------------------------------------
# Library construction
# ---------------------------------------------------------------------------


_UNIT_RE = re.compile(r"^\s*([\d.eE+-]+)\s*([a-zA-Z]+)\s*$")
_TIME = {"s": 1e9, "ms": 1e6, "us": 1e3, "ns": 1.0, "ps": 1e-3, "fs": 1e-6}
_POWER = {"w": 1e6, "mw": 1e3, "uw": 1.0, "nw": 1e-3, "pw": 1e-6}
_CAP = {"f": 1e15, "mf": 1e12, "uf": 1e9, "nf": 1e6, "pf": 1e3, "ff": 1.0}


def _unit(text: str, table: Dict[str, float], what: str) -> float:
    match = _UNIT_RE.match(text.strip('"'))
    if match is None or match.group(2).lower() not in table:
        raise ParseError(f"bad {what} unit '{text}'")
    return float(match.group(1)) * table[match.group(2).lower()]


def _floats(items: Sequence[str]) -> List[List[float]]:
    rows = []
    for item in items:
        rows.append([float(x) for x in re.split(r"[,\s]+", item.strip()) if x])
    return rows


class _LibraryBuilder:
    def __init__(self, group: _Group, source: str):
        self.group = group
        self.source = source
        self.time = 1.0
        self.cap = 1.0
        self.leak = 1.0
        self.templates: Dict[str, _Group] = {}
        self.library = LibertyLibrary(name=group.args[0] if group.args else "")

    def warn(self, message: str) -> None:
        self.library.warnings.append(message)
        logger.warning("Liberty %s", message)

    def build(self) -> LibertyLibrary:
        simple = self.group.simple
        if "time_unit" in simple:
            self.time = _unit(simple["time_unit"], _TIME, "time")
        if "leakage_power_unit" in simple:
            self.leak = _unit(simple["leakage_power_unit"], _POWER, "power")
        if "capacitive_load_unit" in self.group.complex:
            value, unit = self.group.complex["capacitive_load_unit"][:2]
            self.cap = _unit(f"{value}{unit}", _CAP, "capacitance")
        if "nom_voltage" in simple:
            self.library.nom_voltage = float(simple["nom_voltage"])
        if "default_max_transition" in simple:
            default = float(simple["default_max_transition"])
            self.library.default_max_transition = default * self.time
        for kind in ("lu_table_template", "power_lut_template"):
            for tmpl in self.group.groups(kind):
                self.templates[tmpl.args[0]] = tmpl
        for cell_group in self.group.groups("cell"):
            cell = self.build_cell(cell_group)
            self.library.cells[cell.name] = cell
        logger.info(
            "Parsed liberty library=%s cells=%s warnings=%s",
            self.library.name,
            len(self.library.cells),
            len(self.library.warnings),
        )
        return self.library

    def table(self, group: _Group, value_scale: float) -> NldmTable:
        tmpl = self.templates.get(group.args[0]) if group.args else None
        var_1 = tmpl.simple.get("variable_1") if tmpl else None
        var_2 = tmpl.simple.get("variable_2") if tmpl else None

        def axis(key: str) -> Optional[List[float]]:
            if key in group.complex:
                return _floats(group.complex[key])[0]
            if tmpl is not None and key in tmpl.complex:
                return _floats(tmpl.complex[key])[0]
            return None

        idx_1, idx_2 = axis("index_1"), axis("index_2")
        rows = _floats(group.complex.get("values", []))
        if not rows:
            raise ParseError(f"{group.kind} table has no values", group.line, self.source)
        if idx_1 is None and idx_2 is None:
            return NldmTable.scalar(rows[0][0] * value_scale)
        if idx_2 is None:
            # one-dimensional: a single row over variable_1
            values = rows[0]
            if var_1 in _LOAD_VARS:
                return NldmTable((0.0,), tuple(idx_1), (tuple(values),)).scaled(
                    self.time, self.cap, value_scale
                )
            return NldmTable(tuple(idx_1), (0.0,), tuple((v,) for v in values)).scaled(
                self.time, self.cap, value_scale
            )
        if var_1 in _LOAD_VARS or var_2 in _SLEW_VARS:
            transposed = tuple(zip(*rows))
            return NldmTable(tuple(idx_2), tuple(idx_1), transposed).scaled(
                self.time, self.cap, value_scale
            )
        if var_1 in _SLEW_VARS and var_2 in _SLEW_VARS:
            return NldmTable(tuple(idx_1), tuple(idx_2), tuple(map(tuple, rows))).scaled(
                self.time, self.time, value_scale
            )
        return NldmTable(tuple(idx_1), tuple(idx_2), tuple(map(tuple, rows))).scaled(
            self.time, self.cap, value_scale
        )

    def build_arc(self, cell: str, pin: str, group: _Group) -> TimingArc:
        arc = TimingArc(
            related_pin=group.simple.get("related_pin", "").strip('"'),
            pin=pin,
            timing_type=group.simple.get("timing_type", "combinational"),
            unate=group.simple.get("timing_sense", "non_unate"),
        )
        for child in group.children:
            if child.kind in _DELAY_TABLES or child.kind in ("rise_constraint", "fall_constraint"):
                setattr(arc, child.kind, self.table(child, self.time))
        if arc.timing_type in _DELAY_TYPES:
            missing = [name for name in _DELAY_TABLES if getattr(arc, name) is None]
            if missing:
                raise MissingTable(
                    f"{cell}/{pin} arc from {arc.related_pin} lacks {', '.join(missing)}",
                    group.line,
                    self.source,
                )
            if arc.timing_type != "combinational":
                arc.unate = "non_unate"
        elif arc.is_constraint and arc.rise_constraint is None and arc.fall_constraint is None:
            raise MissingTable(
                f"{cell}/{pin} {arc.timing_type} arc has no constraint table",
                group.line,
                self.source,
            )
        return arc

    def build_cell(self, group: _Group) -> LibertyCell:
        cell = LibertyCell(name=group.args[0], area=float(group.simple.get("area", 0.0)))
        if "cell_leakage_power" in group.simple:
            cell.leakage = float(group.simple["cell_leakage_power"]) * self.leak
        for ff in group.groups("ff"):
            cell.ff = FlipFlop(
                clocked_on=ff.simple.get("clocked_on", "").strip('"'),
                next_state=ff.simple.get("next_state", "").strip('"'),
            )
        for pg in group.groups("pin"):
            for name in pg.args:
                cell.pins[name] = self.build_pin(cell.name, name, pg)
        if cell.ff is not None:
            for clk in re.findall(r"\w+", cell.ff.clocked_on):
                if clk in cell.pins:
                    cell.pins[clk].is_clock = True
        return cell

    def build_pin(self, cell: str, name: str, group: _Group) -> LibertyPin:
        simple = group.simple
        pin = LibertyPin(name=name, direction=simple.get("direction", "input"))
        pin.capacitance = float(simple.get("capacitance", 0.0)) * self.cap
        pin.is_clock = simple.get("clock", "false") == "true"
        if "max_capacitance" in simple:
            pin.max_capacitance = float(simple["max_capacitance"]) * self.cap
        if "max_transition" in simple:
            pin.max_transition = float(simple["max_transition"]) * self.time
        if "function" in simple:
            pin.function_text = simple["function"].strip('"')
            try:
                pin.function = parse_function(pin.function_text)
            except ParseError as exc:
                raise ParseError(f"{cell}/{name}: {exc}", group.line, self.source) from exc
        for tg in group.groups("timing"):
            pin.timing.append(self.build_arc(cell, name, tg))
        for pg in group.groups("internal_power"):
            related = pg.simple.get("related_pin")
            power = InternalPower(pin=name, related_pin=related.strip('"') if related else None)
            for child in pg.children:
                if child.kind in ("rise_power", "fall_power"):
                    # energy unit = capacitance unit x V^2
                    setattr(power, child.kind, self.table(child, self.cap))
            pin.internal_power.append(power)
        return pin


def parse_liberty(text: str, source: str = "") -> LibertyLibrary:
    """Parse liberty text into a LibertyLibrary (timing/power half of the technology)."""
    root = _parse_groups(text, source)
    libraries = root.groups("library")
    if not libraries:
        raise ParseError("no library group", 1, source)
    return _LibraryBuilder(libraries[0], source).build()
