"""LEF reader for the technology/cell subset used by the toolkit.

Supported: UNITS, LAYER (ROUTING and CUT), SITE, MACRO with PIN/PORT/OBS RECT geometry. Anything
else is skipped with a warning so vendor extensions do not stop the flow.
"""

from __future__ import annotations

import logging
from typing import List

from .db import (
    CellClass,
    CellMaster,
    CutLayer,
    Direction,
    Layer,
    MasterPin,
    PinDirection,
    PinUse,
    Point,
    Rect,
    Shape,
    Site,
    TechLibrary,
)
from .lexer import TokenStream, tokenize

logger = logging.getLogger(__name__)

# blocks closed by ``END <keyword>`` that carry nothing the toolkit needs
_SKIPPED_BLOCKS = {"VIA", "VIARULE", "NONDEFAULTRULE", "PROPERTYDEFINITIONS", "SPACING", "ARRAY"}
# these are closed by ``END <name>`` instead
_NAMED_BLOCKS = {"VIA", "VIARULE", "NONDEFAULTRULE", "ARRAY"}
# header statements with no bearing on the database
_QUIET_STATEMENTS = {
    "VERSION", "BUSBITCHARS", "DIVIDERCHAR", "NAMESCASESENSITIVE", "MANUFACTURINGGRID"
}


class _LefReader:
    def __init__(self, text: str, source: str):
        self.ts = TokenStream(tokenize(text, punctuation=";", source=source), source)
        self.tech = TechLibrary()
        self.routing: List[Layer] = []

    def warn(self, message: str) -> None:
        line = self.ts.line
        text = f"line {line}: {message}" if line is not None else message
        self.tech.warnings.append(text)
        logger.warning("LEF %s", text)

    def dbu(self, value: float) -> int:
        return int(round(value * self.tech.dbu_per_micron))

    def read(self) -> TechLibrary:
        ts = self.ts
        while not ts.at_end:
            keyword = ts.next()
            if keyword == "END":
                if ts.accept("LIBRARY"):
                    break
                raise ts.error("stray END")
            if keyword == "UNITS":
                self.read_units()
            elif keyword == "LAYER":
                self.read_layer()
            elif keyword == "SITE":
                self.read_site()
            elif keyword == "MACRO":
                self.read_macro()
            elif keyword in _SKIPPED_BLOCKS:
                self.skip_block(keyword)
            elif keyword in _QUIET_STATEMENTS:
                ts.skip_past(";")
            else:
                self.warn(f"skipped statement {keyword}")
                ts.skip_past(";")
        self.tech.layers = sorted(self.routing, key=lambda layer: layer.index)
        logger.info(
            "Parsed LEF layers=%s sites=%s macros=%s warnings=%s",
            len(self.tech.layers),
            len(self.tech.sites),
            len(self.tech.masters),
            len(self.tech.warnings),
        )
        return self.tech

    def skip_block(self, keyword: str) -> None:
        ts = self.ts
        closer = ts.next() if keyword in _NAMED_BLOCKS else keyword
        self.warn(f"skipped {keyword} block")
        while True:
            if ts.next() == "END" and ts.peek() == closer:
                ts.next()
                return

    def read_units(self) -> None:
        ts = self.ts
        while True:
            tok = ts.next()
            if tok == "END":
                ts.expect("UNITS")
                return
            if tok == "DATABASE":
                ts.expect("MICRONS")
                self.tech.dbu_per_micron = ts.next_int()
                ts.expect(";")
            else:
                ts.skip_past(";")

    def read_layer(self) -> None:
        ts = self.ts
        name = ts.next()
        props: dict = {}
        while True:
            tok = ts.next()
            if tok == "END":
                ts.expect(name)
                break
            if tok == "TYPE":
                props["type"] = ts.next()
                ts.skip_past(";")
            elif tok == "DIRECTION":
                props["direction"] = ts.next()
                ts.skip_past(";")
            elif tok in ("PITCH", "WIDTH", "SPACING", "OFFSET"):
                props[tok.lower()] = ts.next_float()
                ts.skip_past(";")
            elif tok == "RESISTANCE":
                if ts.accept("RPERSQ"):
                    props["rpersq"] = ts.next_float()
                else:
                    props["cut_resistance"] = ts.next_float()
                ts.skip_past(";")
            elif tok == "CAPACITANCE":
                ts.accept("CPERSQDIST")
                props["cpersqdist"] = ts.next_float()
                ts.skip_past(";")
            elif tok == "EDGECAPACITANCE":
                props["edgecap"] = ts.next_float()
                ts.skip_past(";")
            else:
                ts.skip_past(";")
        kind = props.get("type", "ROUTING")
        if kind == "CUT":
            self.tech.cut_layers.append(
                CutLayer(
                    name=name,
                    lower=len(self.routing),
                    resistance=props.get("cut_resistance", 0.0),
                )
            )
            return
        if kind != "ROUTING":
            self.warn(f"skipped layer {name} of type {kind}")
            return
        direction = Direction(props.get("direction", "HORIZONTAL"))
        width_um = props.get("width", 0.0)
        pitch = self.dbu(props.get("pitch", 0.0))
        width = self.dbu(width_um)
        spacing = self.dbu(props.get("spacing", 0.0))
        if pitch < width + spacing:
            raise ts.error(f"layer {name}: pitch {pitch} < width {width} + spacing {spacing}")
        offset = self.dbu(props["offset"]) if "offset" in props else pitch // 2
        # Ω/µm = RPERSQ / width(µm); fF/µm = 1000 * (CPERSQDIST * width + 2 * EDGECAPACITANCE)
        r_per_um = props.get("rpersq", 0.0) / width_um if width_um > 0 else 0.0
        c_per_um = 1000.0 * (
            props.get("cpersqdist", 0.0) * width_um + 2 * props.get("edgecap", 0.0)
        )
        per_dbu = 1.0 / self.tech.dbu_per_micron
        self.routing.append(
            Layer(
                name=name,
                index=len(self.routing) + 1,
                direction=direction,
                pitch=pitch,
                width=width,
                spacing=spacing,
                offset=offset,
                resistance=r_per_um * per_dbu,
                capacitance=c_per_um * per_dbu,
            )
        )

    def read_site(self) -> None:
        ts = self.ts
        name = ts.next()
        width = height = 0
        while True:
            tok = ts.next()
            if tok == "END":
                ts.expect(name)
                break
            if tok == "SIZE":
                width = self.dbu(ts.next_float())
                ts.expect("BY")
                height = self.dbu(ts.next_float())
            ts.skip_past(";")
        self.tech.sites[name] = Site(name=name, width=width, height=height)

    def read_rects(self, shapes: List[Shape]) -> None:
        """Read ``LAYER x ; RECT ... ;`` groups until the block's bare END."""
        ts = self.ts
        layer = ""
        while True:
            tok = ts.next()
            if tok == "END":
                return
            if tok == "LAYER":
                layer = ts.next()
                ts.skip_past(";")
            elif tok == "RECT":
                coords = [self.dbu(ts.next_float()) for _ in range(4)]
                ts.skip_past(";")
                shapes.append(Shape(layer, Rect.of(*coords)))
            else:
                ts.skip_past(";")

    def read_pin(self, macro: str) -> MasterPin:
        ts = self.ts
        name = ts.next()
        pin = MasterPin(name=name, direction=PinDirection.INPUT)
        while True:
            tok = ts.next()
            if tok == "END":
                ts.expect(name)
                return pin
            if tok == "DIRECTION":
                pin.direction = PinDirection(ts.next())
                ts.skip_past(";")
            elif tok == "USE":
                use = ts.next()
                pin.use = PinUse(use) if use in PinUse.__members__ else PinUse.SIGNAL
                ts.skip_past(";")
            elif tok == "PORT":
                self.read_rects(pin.shapes)
            else:
                ts.skip_past(";")

    def read_macro(self) -> None:
        ts = self.ts
        name = ts.next()
        master = CellMaster(name=name, width=0, height=0)
        while True:
            tok = ts.next()
            if tok == "END":
                ts.expect(name)
                break
            if tok == "CLASS":
                kind = ts.next()
                sub = ts.peek()
                if kind == "CORE" and sub == "SPACER":
                    master.cls = CellClass.FILLER
                elif kind in CellClass.__members__:
                    master.cls = CellClass(kind)
                else:
                    master.cls = CellClass.CORE
                ts.skip_past(";")
            elif tok == "SIZE":
                master.width = self.dbu(ts.next_float())
                ts.expect("BY")
                master.height = self.dbu(ts.next_float())
                ts.skip_past(";")
            elif tok == "SITE":
                master.site = ts.next()
                ts.skip_past(";")
            elif tok == "PIN":
                pin = self.read_pin(name)
                master.pins[pin.name] = pin
            elif tok == "OBS":
                self.read_rects(master.obstructions)
            else:
                ts.skip_past(";")
        bounds = Rect(Point(0, 0), Point(master.width, master.height))
        for pin in master.pins.values():
            for shape in pin.shapes:
                if not bounds.contains(shape.rect):
                    self.warn(f"pin {name}/{pin.name} geometry outside the cell")
        self.tech.masters[name] = master


def parse_tech_lef(text: str, source: str = "") -> TechLibrary:
    """Parse LEF text into the physical half of a TechLibrary."""
    return _LefReader(text, source).read()
