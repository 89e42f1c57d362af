"""Floorplanning: core/row initialization, IO pin placement, macro packing and PDN generation."""

from __future__ import annotations

import bisect
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

from .db import (
    Blockage,
    BlockageKind,
    CellClass,
    CellMaster,
    Design,
    Instance,
    Orientation,
    PinUse,
    PlacementStatus,
    Point,
    Rect,
    Row,
    SpecialNet,
    SpecialWire,
    Via,
)
from .errors import (
    MacroOverflow,
    PreconditionViolated,
    SpecInfeasible,
    TooManyPorts,
    UtilizationInfeasible,
)
from .models import FloorplanSpec, PdnSpec

logger = logging.getLogger(__name__)

EDGES = ("left", "top", "right", "bottom")


def _ceil_to(value: float, step: int) -> int:
    return int(math.ceil(value / step - 1e-9)) * step


def init_floorplan(design: Design, spec: FloorplanSpec) -> Design:
    """Size the core from cell area and utilization, then fill it with abutting rows."""
    if design.rows:
        raise PreconditionViolated("no prior rows", "floorplan")
    tech = design.tech
    site = tech.core_site()
    sw, rh = site.width, site.height
    std_area = sum(i.master.area for i in design.instances if i.master.cls != CellClass.BLOCK)
    macros = [i for i in design.instances if i.master.cls == CellClass.BLOCK]
    macro_area = sum(i.master.area for i in macros)
    area = (std_area + macro_area) / spec.utilization
    width = max(sw, _ceil_to(math.sqrt(area / spec.aspect_ratio), sw))
    row_count = max(1, int(math.ceil(width * spec.aspect_ratio / rh - 1e-9)))
    height = row_count * rh
    for macro in macros:
        if macro.width > width or macro.height > height:
            raise UtilizationInfeasible(
                f"macro {macro.name} ({macro.width}x{macro.height}) does not fit a "
                f"{width}x{height} core at utilization {spec.utilization}"
            )
    if macro_area + std_area > width * height:
        raise UtilizationInfeasible(f"cell area exceeds core area {width * height}")
    margin = int(round(spec.margin_um * tech.dbu_per_micron))
    mx, my = _ceil_to(margin, sw), _ceil_to(margin, rh)
    design.core = Rect(Point(mx, my), Point(mx + width, my + height))
    design.die = Rect(Point(0, 0), Point(2 * mx + width, 2 * my + height))
    design.rows = [
        Row(
            name=f"ROW_{k}",
            site=site,
            origin=Point(mx, my + k * rh),
            count=width // sw,
            orient=Orientation.N if k % 2 == 0 else Orientation.FS,
        )
        for k in range(row_count)
    ]
    if not design.special_nets:
        design.special_nets = [SpecialNet("VDD", PinUse.POWER), SpecialNet("VSS", PinUse.GROUND)]
    logger.info(
        "Floorplan core=%sx%s rows=%s utilization=%.3f",
        width,
        height,
        row_count,
        (std_area + macro_area) / (width * height),
    )
    return design


def _edge_layers(design: Design) -> Tuple[str, str]:
    """(left/right pin layer, top/bottom pin layer): lowest H and V layers above metal1."""
    layers = design.tech.layers
    upper = layers[1:] or layers
    horizontal = next((lay for lay in upper if lay.is_horizontal), layers[0])
    vertical = next((lay for lay in upper if not lay.is_horizontal), layers[0])
    return horizontal.name, vertical.name


def _boundary_slots(design: Design) -> List[Tuple[float, str, Point, str]]:
    """Track crossings on the die boundary in clockwise perimeter order from the lower-left."""
    die = design.die
    tech = design.tech
    h_name, v_name = _edge_layers(design)
    h_layer, v_layer = tech.layer(h_name), tech.layer(v_name)
    w, h = die.width, die.height
    ys = [y for y in h_layer.tracks(die.ll.y, die.ll.y + 1, die.ur.y)]
    xs = [x for x in v_layer.tracks(die.ll.x, die.ll.x + 1, die.ur.x)]
    slots: List[Tuple[float, str, Point, str]] = []
    for y in ys:
        slots.append((y - die.ll.y, "left", Point(die.ll.x, y), h_name))
    for x in xs:
        slots.append((h + x - die.ll.x, "top", Point(x, die.ur.y), v_name))
    for y in reversed(ys):
        slots.append((h + w + die.ur.y - y, "right", Point(die.ur.x, y), h_name))
    for x in reversed(xs):
        slots.append((2 * h + w + die.ur.x - x, "bottom", Point(x, die.ll.y), v_name))
    return slots


def place_io_pins(design: Design, order: Optional[Sequence[str]] = None) -> Design:
    """Spread ports uniformly clockwise around the die boundary on legal track crossings."""
    if not design.rows:
        raise PreconditionViolated("floorplan initialized", "place_io_pins")
    names = list(order or [])
    for name in names:
        design.port(name)
    names += [p.name for p in design.ports if p.name not in set(names)]
    slots = _boundary_slots(design)
    n, total = len(names), len(slots)
    if n > total:
        raise TooManyPorts(f"{n} ports but only {total} boundary track slots")
    perimeter = 2 * (design.die.width + design.die.height)
    coords = [s[0] for s in slots]
    previous = -1
    for i, name in enumerate(names):
        target = (i + 0.5) * perimeter / n
        k = bisect.bisect_left(coords, target)
        if k > 0 and (k == total or target - coords[k - 1] <= coords[k] - target):
            k -= 1
        k = min(max(k, previous + 1), total - (n - i))
        previous = k
        _, _, location, layer_name = slots[k]
        layer = design.tech.layer(layer_name)
        half = layer.width // 2
        port = design.port(name)
        port.location = location
        port.layer = layer_name
        port.shape = Rect(Point(-half, -half), Point(half, half))
        port.status = PlacementStatus.FIXED
    logger.info("Placed %s IO pins on %s boundary slots", n, total)
    return design


def port_edge(design: Design, location: Point) -> str:
    die = design.die
    if location.x == die.ll.x:
        return "left"
    if location.x == die.ur.x:
        return "right"
    if location.y == die.ur.y:
        return "top"
    return "bottom"


def _io_connections(design: Design, inst: Instance) -> Dict[str, List[Point]]:
    by_edge: Dict[str, List[Point]] = {edge: [] for edge in EDGES}
    for pin in design.instance_pins(inst):
        net = design.net_of(pin)
        if net is None:
            continue
        for other in net.pins:
            if other.instance is None:
                port = design.port(other.pin)
                if port.location is not None:
                    by_edge[port_edge(design, port.location)].append(port.location)
    return by_edge


def _candidates(design: Design, inst: Instance, edge: str) -> List[Point]:
    core = design.core
    sw, rh = design.site_width(), design.row_height()
    w, h = inst.width, inst.height
    max_x = core.ll.x + ((core.width - w) // sw) * sw
    max_y = core.ll.y + ((core.height - h) // rh) * rh
    if max_x < core.ll.x or max_y < core.ll.y:
        return []
    xs = list(range(core.ll.x, max_x + 1, max(sw, (rh // sw) * sw)))
    ys = list(range(core.ll.y, max_y + 1, rh))
    if edge == "left":
        return [Point(core.ll.x, y) for y in ys]
    if edge == "right":
        return [Point(max_x, y) for y in ys]
    if edge == "top":
        return [Point(x, max_y) for x in xs]
    return [Point(x, core.ll.y) for x in xs]


def _blocked_layers(master: CellMaster) -> List[str]:
    """Layers carrying the master's obstructions or pin shapes, sorted by name."""
    names = {shape.layer for shape in master.obstructions}
    names.update(shape.layer for pin in master.pins.values() for shape in pin.shapes)
    return sorted(names)


def place_macros(design: Design, halo: Optional[int] = None) -> Design:
    """Pack block instances against core edges nearest to the IO they connect to.

    Each macro leaves a placement blockage over its halo and a routing blockage over the
    same halo on every layer it obstructs or has pins on.
    """
    halo = design.tech.gcell_size() if halo is None else halo
    macros = [
        i for i in design.instances if i.master.cls == CellClass.BLOCK and not i.is_fixed
    ]
    if not macros:
        return design
    occupied: List[Rect] = [
        i.bbox.expanded(halo)
        for i in design.instances
        if i.master.cls == CellClass.BLOCK and i.is_fixed
    ]
    connections = {m.id: _io_connections(design, m) for m in macros}
    macros.sort(
        key=lambda m: (-sum(len(v) for v in connections[m.id].values()), -m.master.area, m.id)
    )
    for macro in macros:
        by_edge = connections[macro.id]
        ranked = sorted(EDGES, key=lambda e: (-len(by_edge[e]), EDGES.index(e)))
        ports = [p for pts in by_edge.values() for p in pts]
        if ports:
            anchor = Point(
                sum(p.x for p in ports) // len(ports), sum(p.y for p in ports) // len(ports)
            )
        else:
            anchor = design.core.ll
        placed = False
        for edge in ranked:
            options = _candidates(design, macro, edge)
            options.sort(
                key=lambda p: (
                    abs(p.x + macro.width // 2 - anchor.x)
                    + abs(p.y + macro.height // 2 - anchor.y),
                    p.y,
                    p.x,
                )
            )
            for loc in options:
                box = Rect(loc, Point(loc.x + macro.width, loc.y + macro.height))
                if any(box.overlap_area(o) > 0 for o in occupied):
                    continue
                macro.location = loc
                macro.orient = Orientation.N
                macro.status = PlacementStatus.FIXED
                keepout = box.expanded(halo)
                occupied.append(keepout)
                design.blockages.append(
                    Blockage(BlockageKind.PLACEMENT, keepout.clipped(design.core))
                )
                design.blockages.extend(
                    Blockage(BlockageKind.ROUTING, keepout.clipped(design.die), layer)
                    for layer in _blocked_layers(macro.master)
                )
                placed = True
                logger.debug("Macro %s placed at %s on %s edge", macro.name, loc, edge)
                break
            if placed:
                break
        if not placed:
            raise MacroOverflow(f"cannot place macro {macro.name} without overlap")
    logger.info("Placed %s macros", len(macros))
    return design


def load_preplacement(design: Design, def_fragment: str) -> Design:
    """Honour PLACED/FIXED components of a DEF fragment as fixed pre-placements."""
    from .def_io import parse_def

    fragment = parse_def(def_fragment, design.tech, source="preplacement")
    count = 0
    for inst in fragment.instances:
        if not inst.is_placed:
            continue
        if not design.has_instance(inst.name):
            message = f"pre-placed component {inst.name} is not in the netlist"
            design.warnings.append(message)
            logger.warning(message)
            continue
        target = design.instance(inst.name)
        target.location = inst.location
        target.orient = inst.orient
        target.status = PlacementStatus.FIXED
        count += 1
    logger.info("Applied %s pre-placed components", count)
    return design


# ---------------------------------------------------------------------------
# Power delivery network
# ---------------------------------------------------------------------------


def gen_pdn(design: Design, spec: PdnSpec) -> Design:
    """Metal1 follow-pin rails per row boundary plus alternating VDD/VSS stripe meshes."""
    tech = design.tech
    if not design.rows:
        raise PreconditionViolated("rows exist", "gen_pdn")
    dbu = tech.dbu_per_micron
    width = int(round(spec.stripe_width_um * dbu))
    pitch = int(round(spec.stripe_pitch_um * dbu))
    rail_width = int(round(spec.rail_width_um * dbu))
    if width >= pitch:
        raise SpecInfeasible(f"stripe width {width} >= pitch {pitch}")
    layers = {}
    for key in ("rail_layer", "vertical_layer", "horizontal_layer"):
        name = getattr(spec, key)
        if not tech.has_layer(name):
            raise SpecInfeasible(f"unknown PDN layer {name}")
        layers[key] = tech.layer(name)
    if layers["vertical_layer"].index < 2 or layers["horizontal_layer"].index < 2:
        raise SpecInfeasible("stripe layers must be metal2 or above")
    nets = {n.name: n for n in design.special_nets}
    for name, use in (("VDD", PinUse.POWER), ("VSS", PinUse.GROUND)):
        if name not in nets:
            nets[name] = SpecialNet(name, use)
            design.special_nets.append(nets[name])
        nets[name].wires = []
        nets[name].vias = []
    core = design.core
    rail = layers["rail_layer"]
    vert = layers["vertical_layer"]
    horiz = layers["horizontal_layer"]
    rh = design.row_height()
    rails: List[Tuple[str, int]] = []
    for k in range(len(design.rows) + 1):
        net = "VSS" if k % 2 == 0 else "VDD"
        y = core.ll.y + k * rh
        rails.append((net, y))
        nets[net].wires.append(
            SpecialWire(rail.name, rail_width, Point(core.ll.x, y), Point(core.ur.x, y))
        )
    verticals: List[Tuple[str, int]] = []
    x = core.ll.x + pitch // 2
    k = 0
    while x < core.ur.x:
        net = "VDD" if k % 2 == 0 else "VSS"
        verticals.append((net, x))
        nets[net].wires.append(
            SpecialWire(vert.name, width, Point(x, core.ll.y), Point(x, core.ur.y))
        )
        x += pitch
        k += 1
    horizontals: List[Tuple[str, int]] = []
    y = core.ll.y + pitch // 2
    k = 0
    while y < core.ur.y:
        net = "VDD" if k % 2 == 0 else "VSS"
        horizontals.append((net, y))
        nets[net].wires.append(
            SpecialWire(horiz.name, width, Point(core.ll.x, y), Point(core.ur.x, y))
        )
        y += pitch
        k += 1
    rail_via = tech.via_name(rail.index, vert.index)
    mesh_via = tech.via_name(vert.index, horiz.index)
    for vnet, vx in verticals:
        for rnet, ry in rails:
            if vnet == rnet:
                nets[vnet].vias.append(Via(rail_via, Point(vx, ry)))
        for hnet, hy in horizontals:
            if vnet == hnet:
                nets[vnet].vias.append(Via(mesh_via, Point(vx, hy)))
    logger.info(
        "PDN rails=%s vertical=%s horizontal=%s vias=%s",
        len(rails),
        len(verticals),
        len(horizontals),
        sum(len(n.vias) for n in nets.values()),
    )
    return design
