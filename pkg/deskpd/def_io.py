"""DEF reader and writer for the design subset the toolkit checkpoints through.

``write_def`` is deterministic and ``parse_def(write_def(d))`` rebuilds a design equal to ``d``.
"""

from __future__ import annotations

import logging
import re
from typing import Callable, Dict, List, Optional

from .db import (
    Blockage,
    BlockageKind,
    Design,
    NetPin,
    Orientation,
    PinDirection,
    PinUse,
    PlacementStatus,
    Point,
    Rect,
    Row,
    SpecialNet,
    SpecialWire,
    TechLibrary,
    Via,
    Wire,
)
from .errors import ParseError, UnknownMaster
from .lexer import TokenStream, tokenize

logger = logging.getLogger(__name__)

_SKIPPED_SECTIONS = {
    "VIAS", "GROUPS", "REGIONS", "NONDEFAULTRULES", "FILLS", "STYLES", "SCANCHAINS"
}


class _DefReader:
    def __init__(self, text: str, tech: TechLibrary, source: str):
        self.ts = TokenStream(tokenize(text, punctuation=";()", source=source), source)
        self.tech = tech
        self.source = source
        self.scale = 1.0
        self.design = Design(name="", tech=tech)
        self.core: Optional[Rect] = None

    def warn(self, message: str) -> None:
        self.design.warnings.append(message)
        logger.warning("DEF %s", message)

    def coord(self) -> int:
        value = self.ts.next_int()
        return int(round(value * self.scale)) if self.scale != 1.0 else value

    def point(self, prev: Optional[Point] = None) -> Point:
        ts = self.ts
        ts.expect("(")
        raw_x = ts.peek()
        if raw_x == "*" and prev is not None:
            ts.next()
            x = prev.x
        else:
            x = self.coord()
        raw_y = ts.peek()
        if raw_y == "*" and prev is not None:
            ts.next()
            y = prev.y
        else:
            y = self.coord()
        ts.expect(")")
        return Point(x, y)

    def orient(self) -> Orientation:
        raw = self.ts.next()
        if raw not in Orientation.__members__:
            raise self.ts.error(f"orientation {raw} not supported (only N and FS)")
        return Orientation(raw)

    def read(self) -> Design:
        ts = self.ts
        handlers: Dict[str, Callable[[], None]] = {
            "DESIGN": self.read_design_name,
            "UNITS": self.read_units,
            "PROPERTYDEFINITIONS": self.read_properties,
            "DIEAREA": self.read_diearea,
            "ROW": self.read_row,
            "COMPONENTS": self.read_components,
            "PINS": self.read_pins,
            "BLOCKAGES": self.read_blockages,
            "SPECIALNETS": self.read_specialnets,
            "NETS": self.read_nets,
        }
        while not ts.at_end:
            keyword = ts.next()
            if keyword == "END":
                ts.expect("DESIGN")
                break
            handler = handlers.get(keyword)
            if handler is not None:
                handler()
            elif keyword in _SKIPPED_SECTIONS:
                self.warn(f"skipped section {keyword}")
                while not (ts.next() == "END" and ts.peek() == keyword):
                    pass
                ts.next()
            else:
                if keyword not in ("VERSION", "DIVIDERCHAR", "BUSBITCHARS"):
                    self.warn(f"skipped statement {keyword}")
                ts.skip_past(";")
        design = self.design
        design.core = self.core if self.core is not None else design.die
        design.reindex()
        logger.info(
            "Parsed DEF design=%s instances=%s nets=%s ports=%s rows=%s",
            design.name,
            len(design.instances),
            len(design.nets),
            len(design.ports),
            len(design.rows),
        )
        return design

    def read_design_name(self) -> None:
        self.design.name = self.ts.next()
        self.ts.expect(";")

    def read_units(self) -> None:
        ts = self.ts
        ts.expect("DISTANCE")
        ts.expect("MICRONS")
        units = ts.next_int()
        ts.expect(";")
        if units != self.tech.dbu_per_micron:
            self.scale = self.tech.dbu_per_micron / units

    def read_properties(self) -> None:
        ts = self.ts
        while True:
            tok = ts.next()
            if tok == "END":
                ts.expect("PROPERTYDEFINITIONS")
                return
            name = ts.next()
            ts.next()  # type
            values = []
            while ts.peek() != ";":
                values.append(ts.next())
            ts.expect(";")
            if tok == "DESIGN" and name == "coreArea" and values:
                coords = [int(round(float(v) * self.scale)) for v in values[0].split()]
                if len(coords) != 4:
                    raise ts.error("coreArea needs four coordinates")
                self.core = Rect.of(*coords)

    def read_diearea(self) -> None:
        ll = self.point()
        ur = self.point()
        self.ts.expect(";")
        self.design.die = Rect.of(ll.x, ll.y, ur.x, ur.y)

    def read_row(self) -> None:
        ts = self.ts
        name = ts.next()
        site_name = ts.next()
        site = self.tech.sites.get(site_name)
        if site is None:
            raise ts.error(f"unknown site {site_name}")
        origin = Point(self.coord(), self.coord())
        orient = self.orient()
        count = 1
        if ts.accept("DO"):
            count = ts.next_int()
            ts.expect("BY")
            ts.next_int()
            if ts.accept("STEP"):
                ts.next_int()
                ts.next_int()
        ts.skip_past(";")
        self.design.rows.append(Row(name, site, origin, count, orient))

    def read_components(self) -> None:
        ts = self.ts
        ts.next_int()
        ts.expect(";")
        design = self.design
        while True:
            tok = ts.next()
            if tok == "END":
                ts.expect("COMPONENTS")
                return
            if tok != "-":
                raise ts.error(f"expected '-', got '{tok}'")
            name = ts.next()
            master_name = ts.next()
            master = self.tech.masters.get(master_name)
            if master is None:
                raise UnknownMaster(master_name, f"component {name}")
            inst = design.add_instance(name, master)
            while not ts.accept(";"):
                tok = ts.next()
                if tok != "+":
                    continue
                attr = ts.next()
                if attr in ("PLACED", "FIXED"):
                    inst.status = PlacementStatus(attr)
                    inst.location = self.point()
                    inst.orient = self.orient()
                elif attr == "UNPLACED":
                    inst.status = PlacementStatus.UNPLACED

    def read_pins(self) -> None:
        ts = self.ts
        ts.next_int()
        ts.expect(";")
        design = self.design
        while True:
            tok = ts.next()
            if tok == "END":
                ts.expect("PINS")
                return
            if tok != "-":
                raise ts.error(f"expected '-', got '{tok}'")
            name = ts.next()
            attrs: dict = {"direction": PinDirection.INPUT}
            while not ts.accept(";"):
                tok = ts.next()
                if tok != "+":
                    continue
                attr = ts.next()
                if attr == "NET":
                    attrs["net"] = ts.next()
                elif attr == "DIRECTION":
                    attrs["direction"] = PinDirection(ts.next())
                elif attr == "LAYER":
                    attrs["layer"] = ts.next()
                    ll = self.point()
                    ur = self.point()
                    attrs["shape"] = Rect.of(ll.x, ll.y, ur.x, ur.y)
                elif attr in ("PLACED", "FIXED"):
                    attrs["status"] = PlacementStatus(attr)
                    attrs["location"] = self.point()
                    ts.next()
            port = design.add_port(name, attrs["direction"])
            port.layer = attrs.get("layer")
            port.shape = attrs.get("shape")
            port.location = attrs.get("location")
            port.status = attrs.get("status", PlacementStatus.UNPLACED)

    def read_blockages(self) -> None:
        ts = self.ts
        ts.next_int()
        ts.expect(";")
        while True:
            tok = ts.next()
            if tok == "END":
                ts.expect("BLOCKAGES")
                return
            if tok != "-":
                raise ts.error(f"expected '-', got '{tok}'")
            kind = ts.next()
            layer = ts.next() if kind == "LAYER" else None
            while ts.peek() != "RECT":
                ts.next()
            ts.expect("RECT")
            ll = self.point()
            ur = self.point()
            ts.expect(";")
            self.design.blockages.append(
                Blockage(
                    BlockageKind.ROUTING if kind == "LAYER" else BlockageKind.PLACEMENT,
                    Rect.of(ll.x, ll.y, ur.x, ur.y),
                    layer,
                )
            )

    def read_specialnets(self) -> None:
        ts = self.ts
        ts.next_int()
        ts.expect(";")
        while True:
            tok = ts.next()
            if tok == "END":
                ts.expect("SPECIALNETS")
                return
            if tok != "-":
                raise ts.error(f"expected '-', got '{tok}'")
            name = ts.next()
            snet = SpecialNet(name, PinUse.POWER if name != "VSS" else PinUse.GROUND)
            while not ts.accept(";"):
                tok = ts.next()
                if tok == "(":
                    ts.skip_past(")")
                elif tok == "+":
                    attr = ts.next()
                    if attr == "USE":
                        snet.use = PinUse(ts.next())
                    elif attr in ("ROUTED", "FIXED", "COVER"):
                        self.read_special_routing(snet)
            self.design.special_nets.append(snet)

    def read_special_routing(self, snet: SpecialNet) -> None:
        ts = self.ts
        while True:
            layer = ts.next()
            width = self.coord()
            start = self.point()
            if ts.peek() == "(":
                end = self.point(start)
                snet.wires.append(SpecialWire(layer, width, start, end))
            else:
                snet.vias.append(Via(ts.next(), start))
            if not ts.accept("NEW"):
                return

    def read_nets(self) -> None:
        ts = self.ts
        ts.next_int()
        ts.expect(";")
        design = self.design
        while True:
            tok = ts.next()
            if tok == "END":
                ts.expect("NETS")
                return
            if tok != "-":
                raise ts.error(f"expected '-', got '{tok}'")
            net = design.add_net(ts.next())
            while not ts.accept(";"):
                tok = ts.next()
                if tok == "(":
                    owner = ts.next()
                    pin = ts.next()
                    ts.expect(")")
                    if owner == "PIN":
                        design.connect(net, NetPin(None, pin))
                    else:
                        if not design.has_instance(owner):
                            raise ts.error(f"net {net.name} references unknown component {owner}")
                        design.connect(net, NetPin(design.instance(owner).id, pin))
                elif tok == "+":
                    attr = ts.next()
                    if attr == "USE":
                        net.use = PinUse(ts.next())
                    elif attr in ("ROUTED", "FIXED", "COVER"):
                        self.read_routing(net)

    def read_routing(self, net) -> None:
        ts = self.ts
        while True:
            layer = ts.next()
            prev = self.point()
            while True:
                if ts.peek() == "(":
                    nxt = self.point(prev)
                    net.wires.append(Wire(layer, prev, nxt))
                    prev = nxt
                elif ts.peek() not in ("NEW", "+", ";", None):
                    net.vias.append(Via(ts.next(), prev))
                else:
                    break
            if not ts.accept("NEW"):
                return


def parse_def(text: str, tech: TechLibrary, source: str = "") -> Design:
    return _DefReader(text, tech, source).read()


# ---------------------------------------------------------------------------
# Writer
# ---------------------------------------------------------------------------


def _pt(p: Point) -> str:
    return f"( {p.x} {p.y} )"


_STACK_RE = re.compile(r"^via(\d+)_(\d+)$")


def _via_layer(tech: TechLibrary, via: Via) -> str:
    """Bottom routing layer a via (or via stack) sits on."""
    cut = tech.cut(via.name)
    lower = cut.lower if cut is not None else None
    match = _STACK_RE.match(via.name)
    if lower is None and match:
        lower = int(match.group(1))
    if lower is not None and 1 <= lower <= len(tech.layers):
        return tech.layer_by_index(lower).name
    return tech.layers[0].name if tech.layers else "metal1"


def write_def(design: Design) -> str:
    tech = design.tech
    out: List[str] = [
        "VERSION 5.8 ;",
        'DIVIDERCHAR "/" ;',
        'BUSBITCHARS "[]" ;',
        f"DESIGN {design.name} ;",
        f"UNITS DISTANCE MICRONS {tech.dbu_per_micron} ;",
        "",
        "PROPERTYDEFINITIONS",
        f'  DESIGN coreArea STRING "{design.core.ll.x} {design.core.ll.y} '
        f'{design.core.ur.x} {design.core.ur.y}" ;',
        "END PROPERTYDEFINITIONS",
        "",
        f"DIEAREA {_pt(design.die.ll)} {_pt(design.die.ur)} ;",
        "",
    ]
    for row in design.rows:
        out.append(
            f"ROW {row.name} {row.site.name} {row.origin.x} {row.origin.y} {row.orient.value} "
            f"DO {row.count} BY 1 STEP {row.site.width} 0 ;"
        )
    if design.rows:
        out.append("")

    out.append(f"COMPONENTS {len(design.instances)} ;")
    for inst in design.instances:
        if inst.is_placed:
            out.append(
                f"  - {inst.name} {inst.master.name} + {inst.status.value} "
                f"{_pt(inst.location)} {inst.orient.value} ;"
            )
        else:
            out.append(f"  - {inst.name} {inst.master.name} ;")
    out += ["END COMPONENTS", ""]

    out.append(f"PINS {len(design.ports)} ;")
    for port in design.ports:
        parts = [f"  - {port.name}"]
        if port.net is not None:
            parts.append(f"+ NET {design.nets[port.net].name}")
        parts.append(f"+ DIRECTION {port.direction.value}")
        if port.layer is not None and port.shape is not None:
            parts.append(f"+ LAYER {port.layer} {_pt(port.shape.ll)} {_pt(port.shape.ur)}")
        if port.location is not None and port.status != PlacementStatus.UNPLACED:
            parts.append(f"+ {port.status.value} {_pt(port.location)} N")
        out.append(" ".join(parts) + " ;")
    out += ["END PINS", ""]

    if design.blockages:
        out.append(f"BLOCKAGES {len(design.blockages)} ;")
        for blk in design.blockages:
            head = f"LAYER {blk.layer}" if blk.kind == BlockageKind.ROUTING else "PLACEMENT"
            out.append(f"  - {head} RECT {_pt(blk.rect.ll)} {_pt(blk.rect.ur)} ;")
        out += ["END BLOCKAGES", ""]

    out.append(f"SPECIALNETS {len(design.special_nets)} ;")
    for snet in design.special_nets:
        out.append(f"  - {snet.name} ( * {snet.name} ) + USE {snet.use.value}")
        routes = [f"{w.layer} {w.width} {_pt(w.start)} {_pt(w.end)}" for w in snet.wires]
        routes += [f"{_via_layer(tech, v)} 0 {_pt(v.at)} {v.name}" for v in snet.vias]
        for idx, route in enumerate(routes):
            out.append(("    + ROUTED " if idx == 0 else "    NEW ") + route)
        out[-1] += " ;"
    out += ["END SPECIALNETS", ""]

    out.append(f"NETS {len(design.nets)} ;")
    for net in design.nets:
        pins = " ".join(
            f"( PIN {p.pin} )"
            if p.instance is None
            else f"( {design.instances[p.instance].name} {p.pin} )"
            for p in net.pins
        )
        out.append(f"  - {net.name} {pins}".rstrip())
        if net.use != PinUse.SIGNAL:
            out.append(f"    + USE {net.use.value}")
        routes = [f"{w.layer} {_pt(w.start)} {_pt(w.end)}" for w in net.wires]
        routes += [f"{_via_layer(tech, v)} {_pt(v.at)} {v.name}" for v in net.vias]
        for idx, route in enumerate(routes):
            out.append(("    + ROUTED " if idx == 0 else "    NEW ") + route)
        out[-1] += " ;"
    out += ["END NETS", "", "END DESIGN", ""]
    return "\n".join(out)
