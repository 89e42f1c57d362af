"""Design database: technology, design object model, connectivity and spatial queries.

All geometry is integer database units (DBU, 1 nm in the bundled technology). Instances and nets
carry dense integer ids assigned in creation order; every iteration in the toolkit follows id order.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np

from .errors import DuplicateInstance, UnknownMaster, UnknownPin

if TYPE_CHECKING:
    from .boolexpr import Expr
    from .liberty import LibertyCell, LibertyLibrary

logger = logging.getLogger(__name__)


class Direction(str, Enum):
    HORIZONTAL = "HORIZONTAL"
    VERTICAL = "VERTICAL"


class PinDirection(str, Enum):
    INPUT = "INPUT"
    OUTPUT = "OUTPUT"
    INOUT = "INOUT"


class PinUse(str, Enum):
    SIGNAL = "SIGNAL"
    CLOCK = "CLOCK"
    POWER = "POWER"
    GROUND = "GROUND"


NetUse = PinUse


class CellClass(str, Enum):
    CORE = "CORE"
    BLOCK = "BLOCK"
    PAD = "PAD"
    FILLER = "FILLER"


class Orientation(str, Enum):
    N = "N"
    FS = "FS"


class PlacementStatus(str, Enum):
    UNPLACED = "UNPLACED"
    PLACED = "PLACED"
    FIXED = "FIXED"


@dataclass(frozen=True, order=True)
class Point:
    x: int
    y: int

    def manhattan(self, other: "Point") -> int:
        return abs(self.x - other.x) + abs(self.y - other.y)

    def shifted(self, dx: int, dy: int) -> "Point":
        return Point(self.x + dx, self.y + dy)


@dataclass(frozen=True)
class Rect:
    ll: Point
    ur: Point

    def __post_init__(self) -> None:
        if self.ll.x > self.ur.x or self.ll.y > self.ur.y:
            raise ValueError(f"degenerate rect {self.ll}..{self.ur}")

    @classmethod
    def of(cls, x1: int, y1: int, x2: int, y2: int) -> "Rect":
        return cls(Point(min(x1, x2), min(y1, y2)), Point(max(x1, x2), max(y1, y2)))

    @property
    def width(self) -> int:
        return self.ur.x - self.ll.x

    @property
    def height(self) -> int:
        return self.ur.y - self.ll.y

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def center(self) -> Point:
        return Point((self.ll.x + self.ur.x) // 2, (self.ll.y + self.ur.y) // 2)

    def intersects(self, other: "Rect") -> bool:
        """Closed-set intersection (touching edges count)."""
        return (
            self.ll.x <= other.ur.x
            and other.ll.x <= self.ur.x
            and self.ll.y <= other.ur.y
            and other.ll.y <= self.ur.y
        )

    def overlap_area(self, other: "Rect") -> int:
        dx = min(self.ur.x, other.ur.x) - max(self.ll.x, other.ll.x)
        dy = min(self.ur.y, other.ur.y) - max(self.ll.y, other.ll.y)
        if dx <= 0 or dy <= 0:
            return 0
        return dx * dy

    def contains(self, other: "Rect") -> bool:
        return (
            self.ll.x <= other.ll.x
            and self.ll.y <= other.ll.y
            and other.ur.x <= self.ur.x
            and other.ur.y <= self.ur.y
        )

    def contains_point(self, p: Point) -> bool:
        return self.ll.x <= p.x <= self.ur.x and self.ll.y <= p.y <= self.ur.y

    def expanded(self, margin: int) -> "Rect":
        return Rect(self.ll.shifted(-margin, -margin), self.ur.shifted(margin, margin))

    def clipped(self, bounds: "Rect") -> "Rect":
        llx = min(max(self.ll.x, bounds.ll.x), bounds.ur.x)
        lly = min(max(self.ll.y, bounds.ll.y), bounds.ur.y)
        urx = max(min(self.ur.x, bounds.ur.x), llx)
        ury = max(min(self.ur.y, bounds.ur.y), lly)
        return Rect(Point(llx, lly), Point(urx, ury))

    def translated(self, dx: int, dy: int) -> "Rect":
        return Rect(self.ll.shifted(dx, dy), self.ur.shifted(dx, dy))


# ---------------------------------------------------------------------------
# Technology
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Layer:
    """Routing layer. ``resistance`` is Ω per DBU, ``capacitance`` fF per DBU."""

    name: str
    index: int
    direction: Direction
    pitch: int
    width: int
    spacing: int
    offset: int
    resistance: float = 0.0
    capacitance: float = 0.0

    @property
    def is_horizontal(self) -> bool:
        return self.direction == Direction.HORIZONTAL

    def tracks(self, origin: int, lo: int, hi: int) -> List[int]:
        """Track coordinates ``origin + offset + k * pitch`` inside ``[lo, hi)``."""
        first = origin + self.offset
        if lo > first:
            k = -(-(lo - first) // self.pitch)
            first += k * self.pitch
        return list(range(first, hi, self.pitch)) if first < hi else []

    def on_track(self, origin: int, coord: int) -> bool:
        return (coord - origin - self.offset) % self.pitch == 0


@dataclass(frozen=True)
class CutLayer:
    name: str
    lower: int
    resistance: float = 0.0


@dataclass(frozen=True)
class Site:
    name: str
    width: int
    height: int


@dataclass(frozen=True)
class Shape:
    layer: str
    rect: Rect


@dataclass(eq=False)
class MasterPin:
    name: str
    direction: PinDirection
    use: PinUse = PinUse.SIGNAL
    shapes: List[Shape] = field(default_factory=list)

    @property
    def is_supply(self) -> bool:
        return self.use in (PinUse.POWER, PinUse.GROUND)

    def bbox(self) -> Optional[Rect]:
        if not self.shapes:
            return None
        return Rect(
            Point(min(s.rect.ll.x for s in self.shapes), min(s.rect.ll.y for s in self.shapes)),
            Point(max(s.rect.ur.x for s in self.shapes), max(s.rect.ur.y for s in self.shapes)),
        )


@dataclass(eq=False)
class CellMaster:
    """Physical footprint merged with the cell's liberty view (``timing``)."""

    name: str
    width: int
    height: int
    cls: CellClass = CellClass.CORE
    pins: Dict[str, MasterPin] = field(default_factory=dict)
    obstructions: List[Shape] = field(default_factory=list)
    site: Optional[str] = None
    timing: Optional["LibertyCell"] = None
    _pin_offsets: Dict[str, Tuple[int, int]] = field(default_factory=dict, repr=False)

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def is_sequential(self) -> bool:
        return bool(self.timing and self.timing.is_sequential)

    @property
    def is_buffer(self) -> bool:
        return bool(self.timing and self.timing.is_buffer)

    @property
    def is_inverter(self) -> bool:
        return bool(self.timing and self.timing.is_inverter)

    def function(self, pin: str) -> Optional["Expr"]:
        if self.timing is None or pin not in self.timing.pins:
            return None
        return self.timing.pins[pin].function

    def signal_pins(self) -> List[MasterPin]:
        return [p for p in self.pins.values() if not p.is_supply]

    def input_pins(self) -> List[MasterPin]:
        return [p for p in self.signal_pins() if p.direction == PinDirection.INPUT]

    def output_pins(self) -> List[MasterPin]:
        return [p for p in self.signal_pins() if p.direction == PinDirection.OUTPUT]

    def pin_offset(self, pin: str) -> Tuple[int, int]:
        """Pin centre relative to the cell's lower-left corner in N orientation."""
        cached = self._pin_offsets.get(pin)
        if cached is not None:
            return cached
        master_pin = self.pins.get(pin)
        if master_pin is None:
            raise UnknownPin(f"{self.name}/{pin}")
        box = master_pin.bbox()
        if box is None:
            offset = (self.width // 2, self.height // 2)
        else:
            offset = ((box.ll.x + box.ur.x) // 2, (box.ll.y + box.ur.y) // 2)
        self._pin_offsets[pin] = offset
        return offset


_VARIANT_RE = re.compile(r"^(?P<family>.*?X)(?P<drive>\d+)$")


@dataclass(eq=False)
class TechLibrary:
    """Merged physical (LEF) and timing/power (liberty) view of the technology."""

    dbu_per_micron: int = 1000
    layers: List[Layer] = field(default_factory=list)
    cut_layers: List[CutLayer] = field(default_factory=list)
    sites: Dict[str, Site] = field(default_factory=dict)
    masters: Dict[str, CellMaster] = field(default_factory=dict)
    liberty: Optional["LibertyLibrary"] = None
    warnings: List[str] = field(default_factory=list)

    def layer(self, name: str) -> Layer:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(f"unknown routing layer {name}")

    def has_layer(self, name: str) -> bool:
        return any(layer.name == name for layer in self.layers)

    def layer_by_index(self, index: int) -> Layer:
        return self.layers[index - 1]

    def cut_between(self, lower: int) -> CutLayer:
        for cut in self.cut_layers:
            if cut.lower == lower:
                return cut
        return CutLayer(name=f"via{lower}", lower=lower)

    def cut(self, name: str) -> Optional[CutLayer]:
        for cut in self.cut_layers:
            if cut.name == name:
                return cut
        return None

    def master(self, name: str) -> CellMaster:
        master = self.masters.get(name)
        if master is None:
            raise UnknownMaster(name)
        return master

    def core_site(self) -> Site:
        for site in self.sites.values():
            return site
        raise ValueError("technology defines no SITE")

    def attach_liberty(self, library: "LibertyLibrary") -> None:
        """Merge a parsed liberty library into the matching cell masters."""
        self.liberty = library
        for cell in library.cells.values():
            master = self.masters.get(cell.name)
            if master is None:
                message = f"liberty cell {cell.name} has no LEF macro"
                self.warnings.append(message)
                logger.warning(message)
                continue
            master.timing = cell
        missing = [
            m.name for m in self.masters.values() if m.timing is None and m.cls == CellClass.CORE
        ]
        for name in missing:
            logger.debug("macro %s has no liberty view", name)

    def size_variants(self, master: CellMaster) -> List[CellMaster]:
        """Masters sharing ``master``'s family prefix (``NAND2X1``/``NAND2X2``...), by drive."""
        match = _VARIANT_RE.match(master.name)
        if match is None:
            return [master]
        family = match.group("family")
        variants = []
        for candidate in self.masters.values():
            m = _VARIANT_RE.match(candidate.name)
            if m and m.group("family") == family and candidate.timing is not None:
                variants.append((int(m.group("drive")), candidate.name, candidate))
        variants.sort(key=lambda item: (item[0], item[1]))
        return [item[2] for item in variants] or [master]

    def filler_masters(self) -> List[CellMaster]:
        fillers = [m for m in self.masters.values() if m.cls == CellClass.FILLER]
        return sorted(fillers, key=lambda m: (-m.width, m.name))

    def gcell_size(self, tracks: int = 15) -> int:
        """Routing GCell edge: ``tracks`` pitches of metal2 (metal1 if it is the only layer)."""
        layer = self.layers[1] if len(self.layers) > 1 else self.layers[0]
        return tracks * layer.pitch

    def via_name(self, lower: int, upper: int) -> str:
        """Cut name between adjacent layers, ``via<lo>_<hi>`` for a stack."""
        lo, hi = min(lower, upper), max(lower, upper)
        if hi == lo + 1:
            return self.cut_between(lo).name
        return f"via{lo}_{hi}"

    def mean_unit_rc(self) -> Tuple[float, float]:
        if not self.layers:
            return 0.0, 0.0
        r = sum(layer.resistance for layer in self.layers) / len(self.layers)
        c = sum(layer.capacitance for layer in self.layers) / len(self.layers)
        return r, c

    @property
    def nominal_voltage(self) -> float:
        if self.liberty is not None and self.liberty.nom_voltage:
            return self.liberty.nom_voltage
        return 1.0


# ---------------------------------------------------------------------------
# Design
# ---------------------------------------------------------------------------


@dataclass
class Instance:
    id: int
    name: str
    master: CellMaster
    location: Point = Point(0, 0)
    orient: Orientation = Orientation.N
    status: PlacementStatus = PlacementStatus.UNPLACED

    @property
    def width(self) -> int:
        return self.master.width

    @property
    def height(self) -> int:
        return self.master.height

    @property
    def bbox(self) -> Rect:
        return Rect(
            self.location,
            Point(self.location.x + self.master.width, self.location.y + self.master.height),
        )

    @property
    def is_placed(self) -> bool:
        return self.status != PlacementStatus.UNPLACED

    @property
    def is_fixed(self) -> bool:
        return self.status == PlacementStatus.FIXED

    @property
    def is_movable(self) -> bool:
        return self.master.cls == CellClass.CORE and not self.is_fixed

    @property
    def is_row_cell(self) -> bool:
        return self.master.cls in (CellClass.CORE, CellClass.FILLER)

    def pin_position(self, pin: str) -> Point:
        ox, oy = self.master.pin_offset(pin)
        if self.orient == Orientation.FS:
            oy = self.master.height - oy
        return Point(self.location.x + ox, self.location.y + oy)


@dataclass(frozen=True, order=True)
class NetPin:
    """Net terminal: an instance pin (``instance`` id) or a top-level port (``instance`` None)."""

    instance: Optional[int]
    pin: str

    @property
    def is_port(self) -> bool:
        return self.instance is None


@dataclass(frozen=True)
class Wire:
    layer: str
    start: Point
    end: Point

    @property
    def length(self) -> int:
        return self.start.manhattan(self.end)


@dataclass(frozen=True)
class Via:
    name: str
    at: Point


@dataclass
class Net:
    id: int
    name: str
    use: PinUse = PinUse.SIGNAL
    pins: List[NetPin] = field(default_factory=list)
    wires: List[Wire] = field(default_factory=list)
    vias: List[Via] = field(default_factory=list)

    @property
    def is_clock(self) -> bool:
        return self.use == PinUse.CLOCK

    def wirelength(self) -> int:
        return sum(w.length for w in self.wires)


@dataclass(frozen=True)
class SpecialWire:
    layer: str
    width: int
    start: Point
    end: Point

    @property
    def rect(self) -> Rect:
        half = self.width // 2
        if self.start.y == self.end.y:
            return Rect.of(self.start.x, self.start.y - half, self.end.x, self.end.y + half)
        return Rect.of(self.start.x - half, self.start.y, self.end.x + half, self.end.y)


@dataclass
class SpecialNet:
    name: str
    use: PinUse
    wires: List[SpecialWire] = field(default_factory=list)
    vias: List[Via] = field(default_factory=list)


@dataclass
class Port:
    id: int
    name: str
    direction: PinDirection
    net: Optional[int] = None
    location: Optional[Point] = None
    layer: Optional[str] = None
    shape: Optional[Rect] = None
    status: PlacementStatus = PlacementStatus.UNPLACED


@dataclass(frozen=True)
class Row:
    name: str
    site: Site
    origin: Point
    count: int
    orient: Orientation = Orientation.N

    @property
    def width(self) -> int:
        return self.site.width * self.count

    @property
    def height(self) -> int:
        return self.site.height

    @property
    def end_x(self) -> int:
        return self.origin.x + self.width

    @property
    def bbox(self) -> Rect:
        return Rect(self.origin, Point(self.end_x, self.origin.y + self.height))


class BlockageKind(str, Enum):
    PLACEMENT = "PLACEMENT"
    ROUTING = "ROUTING"


@dataclass(frozen=True)
class Blockage:
    kind: BlockageKind
    rect: Rect
    layer: Optional[str] = None


@dataclass
class Design:
    """Single source of truth shared by every tool."""

    name: str
    tech: TechLibrary = field(compare=False, repr=False)
    die: Rect = Rect(Point(0, 0), Point(0, 0))
    core: Rect = Rect(Point(0, 0), Point(0, 0))
    rows: List[Row] = field(default_factory=list)
    instances: List[Instance] = field(default_factory=list)
    nets: List[Net] = field(default_factory=list)
    ports: List[Port] = field(default_factory=list)
    special_nets: List[SpecialNet] = field(default_factory=list)
    blockages: List[Blockage] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list, compare=False, repr=False)
    _inst_by_name: Dict[str, int] = field(default_factory=dict, compare=False, repr=False)
    _net_by_name: Dict[str, int] = field(default_factory=dict, compare=False, repr=False)
    _port_by_name: Dict[str, int] = field(default_factory=dict, compare=False, repr=False)
    _pin_net: Dict[NetPin, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        self.reindex()

    # -- indexes -----------------------------------------------------------

    def reindex(self) -> None:
        self._inst_by_name = {inst.name: inst.id for inst in self.instances}
        self._net_by_name = {net.name: net.id for net in self.nets}
        self._port_by_name = {port.name: port.id for port in self.ports}
        self._pin_net = {}
        for net in self.nets:
            for pin in net.pins:
                self._pin_net[pin] = net.id

    def instance(self, name: str) -> Instance:
        idx = self._inst_by_name.get(name)
        if idx is None:
            raise KeyError(f"unknown instance {name}")
        return self.instances[idx]

    def has_instance(self, name: str) -> bool:
        return name in self._inst_by_name

    def net(self, name: str) -> Net:
        idx = self._net_by_name.get(name)
        if idx is None:
            raise KeyError(f"unknown net {name}")
        return self.nets[idx]

    def has_net(self, name: str) -> bool:
        return name in self._net_by_name

    def port(self, name: str) -> Port:
        idx = self._port_by_name.get(name)
        if idx is None:
            raise KeyError(f"unknown port {name}")
        return self.ports[idx]

    def has_port(self, name: str) -> bool:
        return name in self._port_by_name

    def special_net(self, name: str) -> Optional[SpecialNet]:
        for snet in self.special_nets:
            if snet.name == name:
                return snet
        return None

    # -- construction ------------------------------------------------------

    def add_instance(
        self,
        name: str,
        master: CellMaster,
        location: Optional[Point] = None,
        orient: Orientation = Orientation.N,
        status: PlacementStatus = PlacementStatus.UNPLACED,
    ) -> Instance:
        if name in self._inst_by_name:
            raise DuplicateInstance(name)
        inst = Instance(
            id=len(self.instances),
            name=name,
            master=master,
            location=location or Point(0, 0),
            orient=orient,
            status=status,
        )
        self.instances.append(inst)
        self._inst_by_name[name] = inst.id
        return inst

    def add_net(self, name: str, use: PinUse = PinUse.SIGNAL) -> Net:
        if name in self._net_by_name:
            raise ValueError(f"duplicate net {name}")
        net = Net(id=len(self.nets), name=name, use=use)
        self.nets.append(net)
        self._net_by_name[name] = net.id
        return net

    def add_port(self, name: str, direction: PinDirection) -> Port:
        if name in self._port_by_name:
            raise ValueError(f"duplicate port {name}")
        port = Port(id=len(self.ports), name=name, direction=direction)
        self.ports.append(port)
        self._port_by_name[name] = port.id
        return port

    def connect(self, net: Net, pin: NetPin) -> None:
        if pin in self._pin_net:
            raise ValueError(f"pin {self.pin_name(pin)} already connected")
        if pin.instance is not None:
            inst = self.instances[pin.instance]
            if pin.pin not in inst.master.pins:
                raise UnknownPin(f"{inst.name}/{pin.pin}", f"master {inst.master.name}")
        else:
            self.port(pin.pin).net = net.id
        net.pins.append(pin)
        self._pin_net[pin] = net.id

    def disconnect(self, pin: NetPin) -> None:
        net_id = self._pin_net.pop(pin, None)
        if net_id is None:
            return
        self.nets[net_id].pins.remove(pin)
        if pin.instance is None:
            self.port(pin.pin).net = None

    def remove_instance(self, inst: Instance) -> None:
        """Delete an instance (disconnecting it) and renumber later ids."""
        for pin in list(self.instance_pins(inst)):
            self.disconnect(pin)
        del self.instances[inst.id]
        for idx in range(inst.id, len(self.instances)):
            self.instances[idx].id = idx
        for net in self.nets:
            net.pins = [
                NetPin(p.instance - 1, p.pin)
                if p.instance is not None and p.instance > inst.id
                else p
                for p in net.pins
            ]
        self.reindex()

    def remove_net(self, net: Net) -> None:
        if net.pins:
            raise ValueError(f"net {net.name} still has pins")
        del self.nets[net.id]
        for idx in range(net.id, len(self.nets)):
            self.nets[idx].id = idx
        for port in self.ports:
            if port.net is not None and port.net > net.id:
                port.net -= 1
        self.reindex()

    def unique_name(self, prefix: str, kind: str = "instance") -> str:
        taken = self._inst_by_name if kind == "instance" else self._net_by_name
        k = 0
        while f"{prefix}{k}" in taken:
            k += 1
        return f"{prefix}{k}"

    # -- connectivity queries ----------------------------------------------

    def net_of(self, pin: NetPin) -> Optional[Net]:
        net_id = self._pin_net.get(pin)
        return self.nets[net_id] if net_id is not None else None

    def instance_pins(self, inst: Instance) -> List[NetPin]:
        return [
            NetPin(inst.id, name)
            for name in inst.master.pins
            if NetPin(inst.id, name) in self._pin_net
        ]

    def pin_name(self, pin: NetPin) -> str:
        if pin.instance is None:
            return pin.pin
        return f"{self.instances[pin.instance].name}/{pin.pin}"

    def pin_direction(self, pin: NetPin) -> PinDirection:
        if pin.instance is None:
            return self.port(pin.pin).direction
        return self.instances[pin.instance].master.pins[pin.pin].direction

    def is_driver(self, pin: NetPin) -> bool:
        """Instance outputs and top-level inputs drive their net."""
        direction = self.pin_direction(pin)
        if pin.instance is None:
            return direction == PinDirection.INPUT
        return direction == PinDirection.OUTPUT

    def drivers(self, net: Net) -> List[NetPin]:
        return [p for p in net.pins if self.is_driver(p)]

    def driver(self, net: Net) -> Optional[NetPin]:
        drivers = self.drivers(net)
        return drivers[0] if drivers else None

    def loads(self, net: Net) -> List[NetPin]:
        return [p for p in net.pins if not self.is_driver(p)]

    def pin_position(self, pin: NetPin) -> Optional[Point]:
        if pin.instance is None:
            return self.port(pin.pin).location
        inst = self.instances[pin.instance]
        if not inst.is_placed:
            return None
        return inst.pin_position(pin.pin)

    def pin_layer(self, pin: NetPin) -> int:
        """Technology index of the layer the pin sits on (1 when unknown)."""
        if pin.instance is None:
            name = self.port(pin.pin).layer
        else:
            shapes = self.instances[pin.instance].master.pins[pin.pin].shapes
            name = shapes[0].layer if shapes else None
        if name and self.tech.has_layer(name):
            return self.tech.layer(name).index
        return 1

    def pin_capacitance(self, pin: NetPin) -> float:
        """Input capacitance in fF (0 for ports and drivers without liberty data)."""
        if pin.instance is None:
            return 0.0
        timing = self.instances[pin.instance].master.timing
        if timing is None or pin.pin not in timing.pins:
            return 0.0
        return timing.pins[pin.pin].capacitance

    def signal_nets(self) -> Iterator[Net]:
        return iter(self.nets)

    def row_height(self) -> int:
        if self.rows:
            return self.rows[0].height
        return self.tech.core_site().height

    def site_width(self) -> int:
        if self.rows:
            return self.rows[0].site.width
        return self.tech.core_site().width

    def fingerprint(self) -> str:
        """Stable digest of all mutable design state."""
        digest = hashlib.sha256()
        digest.update(repr((self.die, self.core, self.rows, self.blockages)).encode())
        for inst in self.instances:
            digest.update(
                repr(
                    (inst.name, inst.master.name, inst.location, inst.orient, inst.status)
                ).encode()
            )
        for net in self.nets:
            digest.update(repr((net.name, net.use, net.pins, net.wires, net.vias)).encode())
        for port in self.ports:
            digest.update(repr(port).encode())
        for snet in self.special_nets:
            digest.update(repr(snet).encode())
        return digest.hexdigest()


# ---------------------------------------------------------------------------
# Netlist edits with exact undo
# ---------------------------------------------------------------------------


@dataclass
class BufferEdit:
    """Record of a buffer insertion, enough to restore the design exactly."""

    instance: str
    input_net: str
    output_net: str
    original_pins: List[NetPin]


def buffer_pins(master: CellMaster) -> Tuple[str, str]:
    inputs = master.input_pins()
    outputs = master.output_pins()
    if len(inputs) != 1 or len(outputs) != 1:
        raise ValueError(f"{master.name} is not a single-input single-output cell")
    return inputs[0].name, outputs[0].name


def insert_buffer(
    design: Design,
    net: Net,
    loads: Iterable[NetPin],
    master: CellMaster,
    location: Point,
    *,
    inst_prefix: str = "buf_",
    net_prefix: Optional[str] = None,
    use: Optional[PinUse] = None,
) -> Tuple[Instance, Net, BufferEdit]:
    """Insert ``master`` so that it drives ``loads`` from ``net`` through a new net."""
    in_pin, out_pin = buffer_pins(master)
    original = list(net.pins)
    name = design.unique_name(inst_prefix)
    inst = design.add_instance(name, master, location, status=PlacementStatus.PLACED)
    new_net = design.add_net(
        design.unique_name(net_prefix or f"{net.name}_", kind="net"), use or net.use
    )
    for load in list(loads):
        design.disconnect(load)
        design.connect(new_net, load)
    design.connect(net, NetPin(inst.id, in_pin))
    design.connect(new_net, NetPin(inst.id, out_pin))
    return inst, new_net, BufferEdit(inst.name, net.name, new_net.name, original)


def undo_buffer(design: Design, edit: BufferEdit) -> None:
    """Revert ``insert_buffer``: the input net gets back its original pin list, in order."""
    inst = design.instance(edit.instance)
    removed_id = inst.id
    design.remove_instance(inst)
    out_net = design.net(edit.output_net)
    for pin in list(out_net.pins):
        design.disconnect(pin)
    design.remove_net(out_net)
    in_net = design.net(edit.input_net)
    for pin in list(in_net.pins):
        design.disconnect(pin)
    for pin in edit.original_pins:
        if pin.instance is not None and pin.instance > removed_id:
            pin = NetPin(pin.instance - 1, pin.pin)
        design.connect(in_net, pin)


def resize_instance(design: Design, inst: Instance, master: CellMaster) -> CellMaster:
    """Swap ``inst`` to a pin-compatible ``master``; returns the previous master."""
    previous = inst.master
    for pin in design.instance_pins(inst):
        if pin.pin not in master.pins:
            raise UnknownPin(f"{master.name}/{pin.pin}")
    inst.master = master
    return previous


# ---------------------------------------------------------------------------
# Spatial index and integrity checks
# ---------------------------------------------------------------------------


class SpatialIndex:
    """Uniform bucket grid over placed instances; results always match a linear scan."""

    def __init__(self, design: Design, bucket: Optional[int] = None):
        self.design = design
        self.bucket = bucket or max(1, 10 * design.row_height())
        self._buckets: Dict[Tuple[int, int], List[int]] = {}
        for inst in design.instances:
            if inst.is_placed:
                self._insert(inst)

    def _keys(self, rect: Rect) -> Iterator[Tuple[int, int]]:
        b = self.bucket
        for bx in range(rect.ll.x // b, rect.ur.x // b + 1):
            for by in range(rect.ll.y // b, rect.ur.y // b + 1):
                yield bx, by

    def _insert(self, inst: Instance) -> None:
        for key in self._keys(inst.bbox):
            self._buckets.setdefault(key, []).append(inst.id)

    def query(self, window: Rect) -> List[Instance]:
        found = set()
        for key in self._keys(window):
            for idx in self._buckets.get(key, ()):
                if idx not in found and self.design.instances[idx].bbox.intersects(window):
                    found.add(idx)
        return [self.design.instances[idx] for idx in sorted(found)]


def query_region(design: Design, window: Rect) -> List[Instance]:
    """Placed instances whose bounding box intersects ``window``, in id order."""
    return SpatialIndex(design).query(window)


class ViolationKind(str, Enum):
    MULTI_DRIVER = "MultiDriver"
    OFF_ROW = "OffRow"
    OFF_SITE = "OffSite"
    OUT_OF_CORE = "OutOfCore"
    UNCONNECTED_INPUT = "UnconnectedInput"
    OVERLAP = "Overlap"
    UNPLACED = "Unplaced"


@dataclass(frozen=True)
class IntegrityViolation:
    kind: ViolationKind
    subject: str
    detail: str = ""


def rows_by_y(design: Design) -> Dict[int, List[Row]]:
    table: Dict[int, List[Row]] = {}
    for row in design.rows:
        table.setdefault(row.origin.y, []).append(row)
    return table


def row_check(inst: Instance, table: Dict[int, List[Row]]) -> Optional[ViolationKind]:
    """OFF_ROW / OFF_SITE for a placed row cell, None when it sits on the site grid."""
    for row in table.get(inst.location.y, ()):
        if row.origin.x <= inst.location.x and inst.location.x + inst.width <= row.end_x:
            if (inst.location.x - row.origin.x) % row.site.width != 0:
                return ViolationKind.OFF_SITE
            return None
    return ViolationKind.OFF_ROW


def validate(design: Design) -> List[IntegrityViolation]:
    """Enumerate integrity problems; violations are data, never exceptions."""
    violations: List[IntegrityViolation] = []
    for net in design.nets:
        drivers = design.drivers(net)
        if len(drivers) > 1:
            names = ", ".join(design.pin_name(p) for p in drivers)
            violations.append(IntegrityViolation(ViolationKind.MULTI_DRIVER, net.name, names))
    table = rows_by_y(design)
    for inst in design.instances:
        if not inst.is_placed:
            continue
        if inst.is_row_cell:
            kind = row_check(inst, table)
            if kind is not None:
                violations.append(
                    IntegrityViolation(
                        kind, inst.name, f"at ({inst.location.x}, {inst.location.y})"
                    )
                )
        if not design.core.contains(inst.bbox):
            violations.append(IntegrityViolation(ViolationKind.OUT_OF_CORE, inst.name))
    for inst in design.instances:
        for pin in inst.master.input_pins():
            if NetPin(inst.id, pin.name) not in design._pin_net:
                violations.append(
                    IntegrityViolation(ViolationKind.UNCONNECTED_INPUT, f"{inst.name}/{pin.name}")
                )
    return violations


class SiteMap:
    """Per-row site occupancy used to drop new cells onto the nearest free sites."""

    def __init__(self, design: Design):
        self.design = design
        self.rows = sorted(design.rows, key=lambda r: (r.origin.y, r.origin.x))
        self._occupied = [np.zeros(row.count, dtype=bool) for row in self.rows]
        for inst in design.instances:
            if inst.is_placed:
                self.occupy(inst.bbox)
        for blockage in design.blockages:
            if blockage.kind == BlockageKind.PLACEMENT:
                self.occupy(blockage.rect)

    def _span(self, row: Row, rect: Rect) -> Optional[Tuple[int, int]]:
        if rect.ur.y <= row.origin.y or rect.ll.y >= row.origin.y + row.height:
            return None
        sw = row.site.width
        lo = max(0, (rect.ll.x - row.origin.x) // sw)
        hi = min(row.count, -(-(rect.ur.x - row.origin.x) // sw))
        if hi <= lo:
            return None
        return lo, hi

    def occupy(self, rect: Rect, value: bool = True) -> None:
        for idx, row in enumerate(self.rows):
            span = self._span(row, rect)
            if span is not None:
                self._occupied[idx][span[0] : span[1]] = value

    def release(self, rect: Rect) -> None:
        self.occupy(rect, value=False)

    def is_free(self, rect: Rect) -> bool:
        for idx, row in enumerate(self.rows):
            span = self._span(row, rect)
            if span is not None and self._occupied[idx][span[0] : span[1]].any():
                return False
        return True

    def nearest_free(
        self, target: Point, width: int, radius: int = 50
    ) -> Optional[Tuple[Row, Point]]:
        """Closest free run of sites for a cell of ``width`` DBU within ``radius`` sites/rows."""
        if not self.rows:
            return None
        rh = self.rows[0].height
        best: Optional[Tuple[int, int, int, Row]] = None
        for idx, row in enumerate(self.rows):
            if abs(row.origin.y - target.y) > radius * rh:
                continue
            sw = row.site.width
            need = -(-width // sw)
            if need > row.count:
                continue
            taken = np.concatenate(([0], np.cumsum(self._occupied[idx], dtype=np.int64)))
            starts = np.nonzero(taken[need:] - taken[: row.count - need + 1] == 0)[0]
            if starts.size == 0:
                continue
            centre_site = (target.x - row.origin.x) // sw
            starts = starts[np.abs(starts - centre_site) <= radius]
            if starts.size == 0:
                continue
            xs = row.origin.x + starts * sw
            cost = np.abs(xs - target.x) + abs(row.origin.y - target.y)
            k = int(np.argmin(cost))
            candidate = (int(cost[k]), row.origin.y, int(xs[k]), row)
            if best is None or candidate[:3] < best[:3]:
                best = candidate
        if best is None:
            return None
        return best[3], Point(best[2], best[1])
