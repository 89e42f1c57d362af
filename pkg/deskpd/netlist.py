"""Structural (gate-level) Verilog reader and the design builder that links it to a TechLibrary."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .db import Design, NetPin, PinDirection, PinUse, TechLibrary, SpecialNet
from .errors import (
    ParseError,
    PositionalConnectionUnsupported,
    UndeclaredWire,
    UnknownMaster,
    UnknownPin,
)
from .lexer import TokenStream, tokenize

logger = logging.getLogger(__name__)

_DIRECTIONS = {
    "input": PinDirection.INPUT,
    "output": PinDirection.OUTPUT,
    "inout": PinDirection.INOUT,
}
_UNSUPPORTED = {"assign", "always", "initial", "reg", "generate", "function", "task", "parameter"}


@dataclass(frozen=True)
class PortDecl:
    name: str
    direction: PinDirection


@dataclass
class InstanceDecl:
    master: str
    name: str
    connections: Dict[str, str]
    line: int = 0


@dataclass
class NetlistAST:
    module: str
    ports: List[PortDecl] = field(default_factory=list)
    wires: List[str] = field(default_factory=list)
    instances: List[InstanceDecl] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)


class _VerilogReader:
    def __init__(self, text: str, source: str):
        self.source = source
        self.ts = TokenStream(
            tokenize(text, punctuation="();,.[]:{}=#", line_comment="//", block_comments=True,
                     source=source),
            source,
        )
        self.ast: Optional[NetlistAST] = None
        self.port_order: List[str] = []
        self.directions: Dict[str, PinDirection] = {}
        self.declared: Dict[str, None] = {}
        self.buses: Dict[str, Tuple[int, int]] = {}

    def read(self) -> NetlistAST:
        ts = self.ts
        while not ts.at_end and ts.peek() != "module":
            ts.next()
        if ts.at_end:
            raise ParseError("no module found", 1, self.source)
        ts.expect("module")
        self.ast = NetlistAST(module=ts.next())
        if ts.accept("("):
            self.read_header()
        ts.expect(";")
        while True:
            if ts.at_end:
                raise ts.error("missing endmodule")
            keyword = ts.peek()
            if keyword == "endmodule":
                ts.next()
                break
            if keyword in _DIRECTIONS or keyword == "wire":
                ts.next()
                self.read_declaration(keyword)
            elif keyword in _UNSUPPORTED:
                raise ts.error(f"behavioral construct '{keyword}' is not supported")
            else:
                self.read_instance()
        if not ts.at_end and ts.peek() == "module":
            raise ts.error("only one top module is supported")
        ast = self.ast
        for name in self.port_order:
            if name not in self.directions:
                raise ParseError(f"port {name} has no direction", None, self.source)
            ast.ports.append(PortDecl(name, self.directions[name]))
        ports = set(self.port_order)
        ast.wires = [name for name in self.declared if name not in ports]
        logger.info(
            "Parsed netlist module=%s ports=%s wires=%s instances=%s",
            ast.module,
            len(ast.ports),
            len(ast.wires),
            len(ast.instances),
        )
        return ast

    def read_range(self) -> Optional[Tuple[int, int]]:
        ts = self.ts
        if not ts.accept("["):
            return None
        msb = ts.next_int()
        ts.expect(":")
        lsb = ts.next_int()
        ts.expect("]")
        return msb, lsb

    def expand(self, name: str, rng: Optional[Tuple[int, int]]) -> List[str]:
        if rng is None:
            return [name]
        msb, lsb = rng
        self.buses[name] = rng
        step = -1 if msb >= lsb else 1
        return [f"{name}[{i}]" for i in range(msb, lsb + step, step)]

    def declare(self, names: List[str], kind: str) -> None:
        for name in names:
            self.declared.setdefault(name, None)
            if kind in _DIRECTIONS:
                self.directions[name] = _DIRECTIONS[kind]

    def read_header(self) -> None:
        ts = self.ts
        kind: Optional[str] = None
        rng: Optional[Tuple[int, int]] = None
        while not ts.accept(")"):
            tok = ts.next()
            if tok == ",":
                continue
            if tok in _DIRECTIONS:
                kind = tok
                ts.accept("wire")
                rng = self.read_range()
                continue
            bits = self.expand(tok, rng) if kind else [tok]
            self.port_order.extend(bits)
            if kind:
                self.declare(bits, kind)

    def read_declaration(self, kind: str) -> None:
        ts = self.ts
        ts.accept("wire")
        rng = self.read_range()
        while True:
            name = ts.next()
            bits = self.expand(name, rng)
            self.declare(bits, kind)
            if kind in _DIRECTIONS:
                if rng is not None and name in self.port_order:
                    # a bus named in a plain header expands in place
                    at = self.port_order.index(name)
                    self.port_order[at : at + 1] = bits
                for bit in bits:
                    if bit not in self.port_order:
                        self.port_order.append(bit)
            if ts.accept(";"):
                return
            ts.expect(",")

    def read_net_ref(self) -> Optional[str]:
        ts = self.ts
        if ts.peek() == ")":
            return None
        line = ts.line
        name = ts.next()
        if ts.accept("["):
            index = ts.next_int()
            ts.expect("]")
            name = f"{name}[{index}]"
        if "'" in name:
            self.ast.warnings.append(f"line {line}: constant {name} left unconnected")
            logger.warning("Netlist constant %s left unconnected at line %s", name, line)
            return None
        if name not in self.declared:
            raise UndeclaredWire(f"undeclared net {name}", line, self.source)
        return name

    def read_instance(self) -> None:
        ts = self.ts
        line = ts.line or 0
        master = ts.next()
        if ts.accept("#"):
            ts.expect("(")
            depth = 1
            while depth:
                tok = ts.next()
                depth += {"(": 1, ")": -1}.get(tok, 0)
        name = ts.next()
        ts.expect("(")
        connections: Dict[str, str] = {}
        while not ts.accept(")"):
            if ts.accept(","):
                continue
            if ts.peek() != ".":
                raise PositionalConnectionUnsupported(
                    f"instance {name} uses positional connections", ts.line, self.source
                )
            ts.next()
            pin = ts.next()
            ts.expect("(")
            net = self.read_net_ref()
            ts.expect(")")
            if pin in connections:
                raise ts.error(f"pin {pin} of {name} connected twice")
            if net is not None:
                connections[pin] = net
        ts.expect(";")
        self.ast.instances.append(InstanceDecl(master, name, connections, line))


def parse_netlist(text: str, source: str = "") -> NetlistAST:
    """Parse a flat gate-level module with named connections."""
    return _VerilogReader(text, source).read()


def build_design(tech: TechLibrary, netlist: NetlistAST) -> Design:
    """Link a parsed netlist against the technology into a fully connected, unplaced Design."""
    design = Design(name=netlist.module, tech=tech)
    for decl in netlist.ports:
        port = design.add_port(decl.name, decl.direction)
        net = design.add_net(decl.name)
        design.connect(net, NetPin(None, port.name))
    for wire in netlist.wires:
        design.add_net(wire)
    for decl in netlist.instances:
        master = tech.masters.get(decl.master)
        if master is None:
            raise UnknownMaster(decl.master, f"instance {decl.name}")
        inst = design.add_instance(decl.name, master)
        for pin, net_name in decl.connections.items():
            if pin not in master.pins:
                raise UnknownPin(f"{decl.name}/{pin}", f"master {master.name}")
            if master.pins[pin].is_supply:
                continue
            design.connect(design.net(net_name), NetPin(inst.id, pin))
    for net in design.nets:
        if _drives_clock(design, net):
            net.use = PinUse.CLOCK
        if len(net.pins) < 2:
            message = f"dangling net {net.name} ({len(net.pins)} pin)"
            design.warnings.append(message)
            logger.warning("Design %s", message)
    design.special_nets = [SpecialNet("VDD", PinUse.POWER), SpecialNet("VSS", PinUse.GROUND)]
    logger.info(
        "Built design=%s instances=%s nets=%s ports=%s warnings=%s",
        design.name,
        len(design.instances),
        len(design.nets),
        len(design.ports),
        len(design.warnings),
    )
    return design


def _drives_clock(design: Design, net) -> bool:
    for pin in net.pins:
        if pin.instance is None:
            continue
        master = design.instances[pin.instance].master
        if master.pins[pin.pin].use == PinUse.CLOCK:
            return True
        timing = master.timing
        if timing is not None and pin.pin in timing.pins and timing.pins[pin.pin].is_clock:
            return True
    return False
