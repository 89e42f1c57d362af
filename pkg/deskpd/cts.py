"""Clock tree synthesis: greedy pair matching, zero-skew tapping, level-synchronous buffering.

Every sink sees the same number of buffers: when any merge planned for a level would break
the cap, fanout or slew limit, the whole level is buffered. Merge points are embedded
immediately. The tree is written into the clock nets as real wires on the lowest
horizontal/vertical layer pair above metal1; under the ``skew`` criterion each buffer of a
level gets a serpentine detour on its output so all buffers of the level see the same
sink delay. ``report_skew`` audits that geometry with the same routed RC trees and NLDM
arcs that static timing uses.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from statistics import fmean
from typing import Dict, List, Literal, Optional, Tuple

from .db import (
    CellMaster,
    Design,
    Layer,
    Net,
    NetPin,
    PinUse,
    PlacementStatus,
    Point,
    Rect,
    SiteMap,
    TechLibrary,
    Via,
    Wire,
    buffer_pins,
    insert_buffer,
    resize_instance,
)
from .errors import (
    BufferMasterMissing,
    NoLegalSite,
    NoSinks,
    PreconditionViolated,
    UnknownMaster,
)
from .liberty import TimingArc
from .models import CtsConfig, SkewReport
from .parasitics import routed_parasitics
from .rc import OHM_FF_TO_NS
from .sdc import ClockDef, SdcConstraints

logger = logging.getLogger(__name__)

LN9 = math.log(9.0)
DEFAULT_SOURCE_SLEW = 0.05

_TOOTH_UM = 5.0
_BALANCE_PASSES = 2
_SETTLE_NS = 1e-5

__all__ = ["ClockNode", "ClockTree", "build_clock_tree", "clock_layers", "report_skew", "run_cts"]


@dataclass
class ClockNode:
    id: int
    kind: Literal["root", "merge", "buffer", "sink"]
    location: Point  # tap point, sink pin or buffer input pin
    children: List[int] = field(default_factory=list)
    parent: Optional[int] = None
    pin: Optional[str] = None
    buffer: Optional[str] = None
    snake: int = 0  # serpentine length on the wire to the parent, at this node's end
    detour: int = 0  # serpentine length on a buffer's output, ahead of its stage
    delay: float = 0.0  # modelled insertion delay from this node to its sinks, ns
    cap: float = 0.0  # capacitance presented to the parent stage, fF
    stage: float = 0.0  # wire Elmore delay from this node to the leaves of its stage, ns
    fanout: int = 1
    drive: Optional[Point] = None  # output pin of a buffer, or the clock source
    net: Optional[str] = None  # stage net driven from ``drive``
    pin_layer: Optional[int] = None
    drive_layer: Optional[int] = None
    depth: int = 0  # buffers above this node


@dataclass
class ClockTree:
    clock: str
    nodes: List[ClockNode] = field(default_factory=list)
    root: int = 0
    sinks: List[int] = field(default_factory=list)
    unit_r: float = 0.0
    unit_c: float = 0.0
    buffer_master: Optional[CellMaster] = None
    source_slew: float = DEFAULT_SOURCE_SLEW
    layers: Tuple[str, str] = ("", "")  # (horizontal, vertical)
    design: Optional[Design] = field(default=None, repr=False, compare=False)
    # Filled by report_skew: stage root -> (cap fF, fanout, worst slew ns)
    stage_metrics: Dict[int, Tuple[float, int, float]] = field(default_factory=dict)

    def add(self, node: ClockNode) -> ClockNode:
        node.id = len(self.nodes)
        self.nodes.append(node)
        return node

    @property
    def edge_count(self) -> int:
        return sum(len(n.children) for n in self.nodes)

    @property
    def buffers(self) -> List[ClockNode]:
        return [n for n in self.nodes if n.kind == "buffer"]

    @property
    def stage_roots(self) -> List[ClockNode]:
        return [n for n in self.nodes if n.net is not None]

    @property
    def arc(self) -> TimingArc:
        return self.buffer_master.timing.delay_arcs()[0]

    @property
    def wirelength(self) -> int:
        if self.design is None:
            return 0
        return sum(self.design.net(n.net).wirelength() for n in self.stage_roots)


def clock_layers(tech: TechLibrary) -> Tuple[Layer, Layer]:
    """Lowest horizontal and vertical layers above metal1 (metal1 itself if nothing else)."""
    candidates = [layer for layer in tech.layers if layer.index >= 2] or list(tech.layers)
    horizontal = [layer for layer in candidates if layer.is_horizontal] or candidates
    vertical = [layer for layer in candidates if not layer.is_horizontal] or candidates
    return horizontal[0], vertical[0]


class _Builder:
    def __init__(self, design: Design, clock: ClockDef, cfg: CtsConfig):
        self.design = design
        self.cfg = cfg
        try:
            master = design.tech.master(cfg.buffer)
        except UnknownMaster:
            raise BufferMasterMissing(cfg.buffer) from None
        if master.timing is None or not master.timing.is_buffer:
            raise BufferMasterMissing(cfg.buffer, "not a buffer with timing data")
        self.master = master
        self.arc = master.timing.delay_arcs()[0]
        self.in_cap = master.timing.pins[self.arc.related_pin].capacitance
        horizontal, vertical = clock_layers(design.tech)
        self.r = (horizontal.resistance + vertical.resistance) / 2
        self.c = (horizontal.capacitance + vertical.capacitance) / 2
        self.slew_in = cfg.max_slew_ns / 2
        self.tree = ClockTree(
            clock=clock.name,
            unit_r=self.r,
            unit_c=self.c,
            buffer_master=master,
            layers=(horizontal.name, vertical.name),
        )

    # -- delay model --------------------------------------------------------

    def wire_elmore(self, length: float, load: float) -> float:
        return self.r * length * (self.c * length / 2 + load) * OHM_FF_TO_NS

    def buffer_delay(self, load: float) -> float:
        return self.arc.delay(True, self.slew_in, load)

    def _snake(self, dt: float, load: float) -> float:
        """Wire length whose Elmore delay driving ``load`` equals ``dt`` (Ω·fF)."""
        if dt <= 0 or self.r == 0:
            return 0.0
        if self.c == 0:
            return dt / (self.r * load) if load > 0 else 0.0
        rc = self.r * self.c
        return (-self.r * load + math.sqrt((self.r * load) ** 2 + 2 * rc * dt)) / rc

    def _split(self, a: ClockNode, b: ClockNode, length: int) -> Tuple[int, int, int]:
        """(distance from a to the tap, snake on a, snake on b)."""
        ta, tb = a.delay / OHM_FF_TO_NS, b.delay / OHM_FF_TO_NS
        alpha, beta = self.r * length, self.c * length
        denom = alpha * (beta + a.cap + b.cap)
        x = (tb - ta + alpha * (b.cap + beta / 2)) / denom if denom > 0 else 0.5
        if self.cfg.criterion == "wirelength" or self.r == 0:
            x = min(max(x, 0.0), 1.0)
            return int(round(x * length)), 0, 0
        if 0.0 <= x <= 1.0 and denom > 0:
            return int(round(x * length)), 0, 0
        if ta >= tb:
            need = self._snake(ta - tb, b.cap)
            return 0, 0, max(0, int(round(need)) - length)
        need = self._snake(tb - ta, a.cap)
        return length, max(0, int(round(need)) - length), 0

    # -- construction -------------------------------------------------------

    def merge(self, a: ClockNode, b: ClockNode) -> Tuple[ClockNode, int, int]:
        """Merge node over ``a`` and ``b`` plus the snakes it needs; nothing is committed."""
        length = a.location.manhattan(b.location)
        da, snake_a, snake_b = self._split(a, b, length)
        tap = _along(a.location, b.location, da)
        la = a.location.manhattan(tap) + snake_a
        lb = b.location.manhattan(tap) + snake_b
        node = ClockNode(0, "merge", tap, children=[a.id, b.id])
        node.delay = max(
            a.delay + self.wire_elmore(la, a.cap), b.delay + self.wire_elmore(lb, b.cap)
        )
        node.cap = a.cap + b.cap + self.c * (la + lb)
        node.stage = max(
            a.stage + self.wire_elmore(la, a.cap), b.stage + self.wire_elmore(lb, b.cap)
        )
        node.fanout = a.fanout + b.fanout
        return node, snake_a, snake_b

    def violates(self, node: ClockNode) -> bool:
        cfg = self.cfg
        return (
            node.cap > cfg.max_cap_ff
            or node.fanout > cfg.max_fanout
            or LN9 * node.stage > cfg.max_slew_ns
        )

    def buffered(self, child: ClockNode) -> ClockNode:
        buf = self.tree.add(ClockNode(0, "buffer", child.location, children=[child.id]))
        child.parent = buf.id
        buf.cap = self.in_cap
        buf.delay = self.buffer_delay(child.cap) + child.delay
        return buf

    def build(self, sinks: List[Tuple[str, Point, float]], source: Point) -> ClockTree:
        tree = self.tree
        level: List[ClockNode] = []
        for name, location, cap in sinks:
            node = tree.add(ClockNode(0, "sink", location, pin=name, cap=cap))
            tree.sinks.append(node.id)
            level.append(node)
        while len(level) > 1:
            level = self._merge_level(level)
        top = level[0]
        length = source.manhattan(top.location)
        stage = top.stage + self.wire_elmore(length, top.cap)
        cap = top.cap + self.c * length
        over = cap > self.cfg.max_cap_ff or LN9 * stage > self.cfg.max_slew_ns
        if over and top.kind != "buffer":
            top = self.buffered(top)
        root = tree.add(ClockNode(0, "root", source, children=[top.id]))
        top.parent = root.id
        root.delay = top.delay + self.wire_elmore(length, top.cap)
        tree.root = root.id
        return tree

    def _match(
        self, level: List[ClockNode]
    ) -> Tuple[List[Tuple[ClockNode, ClockNode]], List[ClockNode]]:
        """Greedy matching on (distance, lower id, higher id); an odd node carries over."""
        heap = []
        for i, a in enumerate(level):
            for b in level[i + 1 :]:
                lo, hi = (a, b) if a.id < b.id else (b, a)
                heap.append((a.location.manhattan(b.location), lo.id, hi.id))
        heapq.heapify(heap)
        by_id = {n.id: n for n in level}
        matched: set = set()
        pairs: List[Tuple[ClockNode, ClockNode]] = []
        while heap and len(matched) + 1 < len(level):
            _, i, j = heapq.heappop(heap)
            if i in matched or j in matched:
                continue
            matched.update((i, j))
            pairs.append((by_id[i], by_id[j]))
        return pairs, [n for n in level if n.id not in matched]

    def _buffer_level(self, level: List[ClockNode]) -> List[ClockNode]:
        buffers = [self.buffered(node) for node in level]
        if self.cfg.criterion == "skew":
            # the detours placed after embedding bring every buffer of the level to the slowest
            slowest = max(b.delay for b in buffers)
            for b in buffers:
                b.delay = slowest
        return buffers

    def _merge_level(self, level: List[ClockNode]) -> List[ClockNode]:
        pairs, carry = self._match(level)
        planned = [self.merge(a, b) for a, b in pairs]
        blocked = any(self.violates(node) for node, _, _ in planned)
        if blocked and any(n.kind != "buffer" for n in level):
            level = self._buffer_level(level)
            pairs, carry = self._match(level)
            planned = [self.merge(a, b) for a, b in pairs]
        merged: List[ClockNode] = []
        for (a, b), (node, snake_a, snake_b) in zip(pairs, planned):
            if self.violates(node):
                logger.debug("Clock merge at %s exceeds limits after buffering", node.location)
            node = self.tree.add(node)
            a.parent = b.parent = node.id
            a.snake, b.snake = snake_a, snake_b
            merged.append(node)
        return merged + carry


def _along(a: Point, b: Point, distance: int) -> Point:
    """Point ``distance`` along the x-then-y Manhattan path from ``a`` to ``b``."""
    dx, dy = b.x - a.x, b.y - a.y
    step_x = min(distance, abs(dx))
    rest = distance - step_x
    step_y = min(rest, abs(dy))
    return Point(a.x + (step_x if dx >= 0 else -step_x), a.y + (step_y if dy >= 0 else -step_y))


def _clock_net(design: Design, clock: ClockDef) -> Net:
    if clock.source is None:
        raise NoSinks(f"clock {clock.name} has no source object")
    if "/" in clock.source:
        inst_name, pin = clock.source.rsplit("/", 1)
        net = design.net_of(NetPin(design.instance(inst_name).id, pin))
    else:
        port = design.port(clock.source)
        net = design.nets[port.net] if port.net is not None else None
    if net is None:
        raise NoSinks(f"clock source {clock.source} drives no net")
    return net


def _source_location(design: Design, net: Net) -> Point:
    driver = design.driver(net)
    location = design.pin_position(driver) if driver is not None else None
    return location or design.core.center


def _sinks(design: Design, net: Net) -> List[NetPin]:
    sinks = []
    for pin in net.pins:
        if pin.instance is None:
            continue
        timing = design.instances[pin.instance].master.timing
        if timing is not None and timing.is_sequential and timing.clock_pin() == pin.pin:
            sinks.append(pin)
    return sinks


def build_clock_tree(
    design: Design,
    clock: ClockDef,
    cfg: CtsConfig = CtsConfig(),
    source_slew: float = DEFAULT_SOURCE_SLEW,
) -> ClockTree:
    """Synthesize, buffer, legalize, splice in and wire one clock tree."""
    net = _clock_net(design, clock)
    pins = _sinks(design, net)
    if not pins:
        raise NoSinks(f"clock {clock.name} reaches no sequential clock pin")
    for pin in pins:
        if not design.instances[pin.instance].is_placed:
            raise PreconditionViolated("legal placement", "cts")
    builder = _Builder(design, clock, cfg)
    sinks = [
        (design.pin_name(p), design.pin_position(p), design.pin_capacitance(p)) for p in pins
    ]
    tree = builder.build(sinks, _source_location(design, net))
    tree.source_slew = source_slew
    _embed(design, tree, net, pins, cfg)
    for start in tree.stage_roots:
        _emit_stage(tree, start)
    if cfg.criterion == "skew":
        _balance(tree)
    report = report_skew(tree)
    logger.info(
        "CTS clock=%s sinks=%s buffers=%s skew=%.4f insertion=%.4f wirelength=%s snaking=%s",
        clock.name,
        len(pins),
        report.buffer_count,
        report.max_skew,
        report.mean_insertion,
        report.wirelength,
        report.snaking,
    )
    return tree


def _embed(design: Design, tree: ClockTree, net: Net, pins: List[NetPin], cfg: CtsConfig) -> None:
    """Legalize buffers and rewire the clock net top-down into buffered stage nets."""
    tree.design = design
    pin_of = {design.pin_name(p): p for p in pins}
    sites = SiteMap(design)
    master = tree.buffer_master
    in_pin, out_pin = buffer_pins(master)

    def sinks_below(node: ClockNode) -> List[NetPin]:
        found: List[NetPin] = []
        stack = [node.id]
        while stack:
            current = tree.nodes[stack.pop()]
            if current.kind == "sink":
                found.append(pin_of[current.pin])
            stack.extend(reversed(current.children))
        return sorted(found, key=lambda p: (p.instance, p.pin))

    root = tree.nodes[tree.root]
    root.drive = root.location
    root.net = net.name
    driver = design.driver(net)
    root.drive_layer = design.pin_layer(driver) if driver is not None else None

    def walk(node_id: int, stage_net: Net, depth: int) -> None:
        node = tree.nodes[node_id]
        node.depth = depth
        if node.kind == "sink":
            node.pin_layer = design.pin_layer(pin_of[node.pin])
        elif node.kind == "buffer":
            target = Point(
                node.location.x - master.width // 2, node.location.y - master.height // 2
            )
            found = sites.nearest_free(target, master.width, cfg.search_radius)
            if found is None:
                raise NoLegalSite(f"no free site for clock buffer near {node.location}")
            row, location = found
            inst, new_net, _ = insert_buffer(
                design,
                stage_net,
                sinks_below(node),
                master,
                location,
                inst_prefix=f"cts_{tree.clock}_buf_",
                net_prefix=f"{tree.clock}_cts_",
                use=PinUse.CLOCK,
            )
            inst.orient = row.orient
            inst.status = PlacementStatus.PLACED
            sites.occupy(inst.bbox)
            node.buffer = inst.name
            node.location = inst.pin_position(in_pin)
            node.drive = inst.pin_position(out_pin)
            node.net = new_net.name
            node.pin_layer = design.pin_layer(NetPin(inst.id, in_pin))
            node.drive_layer = design.pin_layer(NetPin(inst.id, out_pin))
            stage_net = new_net
            depth += 1
        for child in node.children:
            walk(child, stage_net, depth)

    walk(tree.root, net, 0)


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


def _comb(start: Point, length: int, toward: int, die: Rect, tooth: int, rung: int) -> List[Point]:
    """Serpentine polyline of ``length`` DBU from ``start``: vertical teeth stepping in x."""
    if length <= 0:
        return [start]
    step = 1 if toward >= start.x else -1
    teeth = max(1, -(-length // (2 * tooth + 2 * rung)))
    travel = (2 * teeth - 1) * rung
    room = die.ur.x - start.x if step > 0 else start.x - die.ll.x
    if room < travel and (die.width - room) > room:
        step = -step
    legs = length - travel
    if legs < 2:
        return [start, Point(start.x + step * length, start.y)]
    rise = 1 if start.y + tooth <= die.ur.y else -1
    half = legs // 2
    points = [start]
    x, y = start.x, start.y
    for i in range(teeth):
        h = half // teeth + (1 if i < half % teeth else 0)
        points.append(Point(x, y + rise * h))
        x += step * rung
        points.append(Point(x, y + rise * h))
        points.append(Point(x, y))
        if i < teeth - 1:
            x += step * rung
            points.append(Point(x, y))
    return points


def _emit_stage(tree: ClockTree, start: ClockNode) -> None:
    """Replace the wires of the stage net driven by ``start`` with its L routes and serpentines."""
    design = tree.design
    tech = design.tech
    horizontal, vertical = tech.layer(tree.layers[0]), tech.layer(tree.layers[1])
    low, high = sorted((horizontal.index, vertical.index))
    tooth = int(_TOOTH_UM * tech.dbu_per_micron)
    rung = 2 * vertical.pitch
    spans: Dict[Point, Tuple[int, int]] = {}
    lines: List[List[Point]] = []

    def mark(p: Point, layer: Optional[int] = None) -> None:
        lo, hi = low, high
        if layer is not None:
            lo, hi = min(lo, layer), max(hi, layer)
        old = spans.get(p)
        spans[p] = (lo, hi) if old is None else (min(old[0], lo), max(old[1], hi))

    first = tree.nodes[start.children[0]].location if start.children else start.drive
    head = _comb(start.drive, start.detour, first.x, design.die, tooth, rung)
    lines.append(head)
    mark(start.drive, start.drive_layer)
    stack = [(child, head[-1]) for child in reversed(start.children)]
    while stack:
        node_id, origin = stack.pop()
        node = tree.nodes[node_id]
        target = node.location
        tail = _comb(target, node.snake, origin.x, design.die, tooth, rung)
        tail.reverse()
        lines.append([origin, Point(tail[0].x, origin.y), tail[0]])
        lines.append(tail)
        mark(target, node.pin_layer)
        if node.kind == "merge":
            stack.extend((child, target) for child in reversed(node.children))

    wires: List[Wire] = []
    for line in lines:
        for a, b in zip(line, line[1:]):
            if a != b:
                layer = horizontal if a.y == b.y else vertical
                wires.append(Wire(layer.name, a, b))
        for p in line:
            mark(p)
    net = design.net(start.net)
    net.wires = wires
    net.vias = [Via(tech.via_name(lo, hi), p) for p, (lo, hi) in sorted(spans.items()) if lo != hi]


# ---------------------------------------------------------------------------
# Audit and balancing
# ---------------------------------------------------------------------------


def _stage_leaves(tree: ClockTree, start: ClockNode) -> List[ClockNode]:
    leaves: List[ClockNode] = []
    stack = list(reversed(start.children))
    while stack:
        node = tree.nodes[stack.pop()]
        if node.kind in ("sink", "buffer"):
            leaves.append(node)
        else:
            stack.extend(reversed(node.children))
    return leaves


def _leaf_pin(tree: ClockTree, node: ClockNode) -> NetPin:
    design = tree.design
    if node.kind == "sink":
        inst_name, pin = node.pin.rsplit("/", 1)
        return NetPin(design.instance(inst_name).id, pin)
    return NetPin(design.instance(node.buffer).id, tree.arc.related_pin)


def _audit(
    tree: ClockTree,
    start: ClockNode,
    arrival: float,
    slew: float,
    sinks: Dict[str, float],
    inputs: Optional[Dict[int, float]] = None,
    metrics: Optional[Dict[int, Tuple[float, int, float]]] = None,
) -> None:
    """Rise arrival of every sink below ``start``, reached at ``arrival`` with ``slew``."""
    design = tree.design
    parasitics = routed_parasitics(design, design.net(start.net))
    load = parasitics.load_cap
    if start.kind == "buffer":
        arc = design.instance(start.buffer).master.timing.delay_arcs()[0]
        arrival += arc.delay(True, slew, load)
        slew = arc.transition(True, slew, load)
    leaves = _stage_leaves(tree, start)
    worst = slew
    for leaf in leaves:
        wire = parasitics.delay_to(_leaf_pin(tree, leaf))
        at = arrival + wire
        leaf_slew = math.sqrt(slew**2 + (LN9 * wire) ** 2)
        worst = max(worst, leaf_slew)
        if leaf.kind == "sink":
            sinks[leaf.pin] = at
            continue
        if inputs is not None:
            inputs[leaf.id] = leaf_slew
        _audit(tree, leaf, at, leaf_slew, sinks, inputs, metrics)
    if metrics is not None:
        metrics[start.id] = (load, len(leaves), worst)


def _below(tree: ClockTree, node: ClockNode, slew: float) -> float:
    """Mean sink delay from the input of buffer ``node``."""
    sinks: Dict[str, float] = {}
    _audit(tree, node, 0.0, slew, sinks)
    return fmean(sinks.values())


def _settle(tree: ClockTree, node: ClockNode, slew: float, target: float) -> None:
    """Bisect the output detour of ``node`` until its sinks arrive at ``target``."""
    die = tree.design.die
    limit = 4 * (die.width + die.height)

    def below(length: int) -> float:
        node.detour = length
        _emit_stage(tree, node)
        return _below(tree, node, slew)

    lo, hi = 0, tree.design.tech.dbu_per_micron
    while below(hi) < target:
        if hi >= limit:
            logger.debug("Clock buffer %s detour capped at %s", node.buffer, limit)
            break
        lo, hi = hi, min(2 * hi, limit)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if below(mid) < target:
            lo = mid
        else:
            hi = mid
    best = min((lo, hi), key=lambda length: (abs(below(length) - target), length))
    below(best)


def _stage_root(tree: ClockTree, node: ClockNode) -> ClockNode:
    parent = tree.nodes[node.parent]
    while parent.net is None:
        parent = tree.nodes[parent.parent]
    return parent


def _swap(tree: ClockTree, node: ClockNode, master: CellMaster) -> None:
    design = tree.design
    inst = design.instance(node.buffer)
    resize_instance(design, inst, master)
    in_pin, out_pin = buffer_pins(master)
    node.location = inst.pin_position(in_pin)
    node.drive = inst.pin_position(out_pin)
    _emit_stage(tree, _stage_root(tree, node))
    _emit_stage(tree, node)


def _downsize(tree: ClockTree, node: ClockNode, slew: float, target: float) -> None:
    """Swap ``node`` to the weakest variant, no wider than now, whose sinks are not late."""
    current = tree.design.instance(node.buffer).master
    best, best_delay = current, _below(tree, node, slew)
    for variant in tree.design.tech.size_variants(current):
        if variant is current or variant.width > current.width:
            continue
        _swap(tree, node, variant)
        delay = _below(tree, node, slew)
        if best_delay < delay <= target:
            best, best_delay = variant, delay
    _swap(tree, node, best)


def _balance(tree: ClockTree) -> None:
    """Give every buffer of a level the sink delay of the slowest one, deepest level first.

    Faster buffers are first downsized in place, then padded with an output detour.
    """
    levels: Dict[int, List[ClockNode]] = {}
    for node in tree.buffers:
        levels.setdefault(node.depth, []).append(node)
    for _ in range(_BALANCE_PASSES):
        for depth in sorted(levels, reverse=True):
            slews: Dict[int, float] = {}
            _audit(tree, tree.nodes[tree.root], 0.0, tree.source_slew, {}, slews)
            base: Dict[int, float] = {}
            for node in levels[depth]:
                node.detour = 0
                _emit_stage(tree, node)
                base[node.id] = _below(tree, node, slews[node.id])
            target = max(base.values())
            for node in levels[depth]:
                if target - base[node.id] > _SETTLE_NS:
                    _downsize(tree, node, slews[node.id], target)
                    _settle(tree, node, slews[node.id], target)


def report_skew(tree: ClockTree) -> SkewReport:
    """Insertion delay per sink from the routed clock wires, plus skew and resource usage."""
    if tree.design is None:
        raise PreconditionViolated("embedded clock tree", "report_skew")
    delays: Dict[str, float] = {}
    tree.stage_metrics = {}
    _audit(tree, tree.nodes[tree.root], 0.0, tree.source_slew, delays, None, tree.stage_metrics)
    values = [delays[k] for k in sorted(delays)]
    skew = max(values) - min(values) if values else 0.0
    return SkewReport(
        clock=tree.clock,
        max_skew=skew,
        mean_insertion=sum(values) / len(values) if values else 0.0,
        insertion_delays={k: delays[k] for k in sorted(delays)},
        buffer_count=len(tree.buffers),
        wirelength=tree.wirelength,
        snaking=sum(n.snake + n.detour for n in tree.nodes),
    )


def run_cts(design: Design, sdc: SdcConstraints, cfg: CtsConfig = CtsConfig()) -> List[ClockTree]:
    """One independent tree per SDC clock whose source exists in the design."""
    trees = []
    for clock in sdc.clocks:
        if clock.source is None:
            continue
        slew = sdc.input_transitions.get(clock.source, DEFAULT_SOURCE_SLEW)
        trees.append(build_clock_tree(design, clock, cfg, slew))
    return trees
