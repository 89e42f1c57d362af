"""Net parasitic estimation: star model before routing, segment-following RC trees after."""

from __future__ import annotations

import logging
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Mapping, Optional, Tuple

from .db import Design, Net, NetPin, Point
from .rc import RcTree

logger = logging.getLogger(__name__)

Mode = Literal["preroute", "postroute"]
_STACK_RE = re.compile(r"^via(\d+)_(\d+)$")

Node = Tuple[int, int, int]  # (layer index, x, y)


@dataclass
class NetParasitics:
    net: str
    tree: RcTree
    pin_nodes: Dict[NetPin, int] = field(default_factory=dict)
    wire_cap: float = 0.0
    wire_res: float = 0.0

    @property
    def load_cap(self) -> float:
        """Total capacitance seen by the driver, pins included (fF)."""
        return self.tree.total_cap

    def delay_to(self, pin: NetPin) -> float:
        node = self.pin_nodes.get(pin)
        return self.tree.elmore()[node] if node is not None else 0.0


def _pin_cap(design: Design, pin: NetPin, port_loads: Mapping[str, float]) -> float:
    if pin.instance is None:
        return port_loads.get(pin.pin, 0.0)
    return design.pin_capacitance(pin)


def _root(design: Design, net: Net) -> Optional[NetPin]:
    if not net.pins:
        return None
    return design.driver(net) or net.pins[0]


def star_parasitics(
    design: Design, net: Net, port_loads: Mapping[str, float] = {}
) -> NetParasitics:
    """HPWL-sized wire split over driver-to-load branches by Manhattan distance."""
    root = _root(design, net)
    tree = RcTree()
    result = NetParasitics(net.name, tree)
    if root is None:
        return result
    result.pin_nodes[root] = 0
    tree.add_cap(0, _pin_cap(design, root, port_loads))
    loads = [p for p in net.pins if p != root]
    positions = {p: design.pin_position(p) for p in net.pins}
    placed = [pos for pos in positions.values() if pos is not None]
    unit_r, unit_c = design.tech.mean_unit_rc()
    if len(placed) >= 2:
        hpwl = (max(p.x for p in placed) - min(p.x for p in placed)) + (
            max(p.y for p in placed) - min(p.y for p in placed)
        )
    else:
        hpwl = 0
    total_r, total_c = hpwl * unit_r, hpwl * unit_c
    result.wire_cap, result.wire_res = total_c, total_r
    start = positions[root]
    distances = [
        start.manhattan(positions[p]) if start is not None and positions[p] is not None else 0
        for p in loads
    ]
    span = sum(distances)
    for pin, dist in zip(loads, distances):
        share = dist / span if span > 0 else 1.0 / len(loads)
        branch_c = total_c * share
        tree.add_cap(0, branch_c / 2)
        node = tree.add_node(0, total_r * share, branch_c / 2 + _pin_cap(design, pin, port_loads))
        result.pin_nodes[pin] = node
    return result


def _via_span(design: Design, name: str) -> Optional[Tuple[int, int, float]]:
    """(lower layer index, upper layer index, resistance per cut) for a via name."""
    tech = design.tech
    cut = tech.cut(name)
    if cut is not None:
        return cut.lower, cut.lower + 1, cut.resistance
    match = _STACK_RE.match(name)
    if match:
        lo, hi = int(match.group(1)), int(match.group(2))
        resistance = sum(tech.cut_between(lower).resistance for lower in range(lo, hi))
        return lo, hi, resistance
    return None


def routed_parasitics(
    design: Design, net: Net, port_loads: Mapping[str, float] = {}
) -> NetParasitics:
    """RC tree over the net's wires and vias, spanning-tree by BFS from the driver."""
    tech = design.tech
    # Split every wire at points where other geometry touches it.
    points_by_layer: Dict[int, set] = {}
    for wire in net.wires:
        idx = tech.layer(wire.layer).index
        points_by_layer.setdefault(idx, set()).update({wire.start, wire.end})
    via_edges: List[Tuple[Node, Node, float]] = []
    for via in net.vias:
        span = _via_span(design, via.name)
        if span is None:
            continue
        lo, hi, r_cut = span
        for layer in range(lo, hi + 1):
            points_by_layer.setdefault(layer, set()).add(via.at)
        for layer in range(lo, hi):
            via_edges.append(((layer, via.at.x, via.at.y), (layer + 1, via.at.x, via.at.y), r_cut))
    caps: Dict[Node, float] = {}
    adjacency: Dict[Node, List[Tuple[Node, float]]] = {}
    wire_r = wire_c = 0.0

    def link(a: Node, b: Node, r: float) -> None:
        adjacency.setdefault(a, []).append((b, r))
        adjacency.setdefault(b, []).append((a, r))
        caps.setdefault(a, 0.0)
        caps.setdefault(b, 0.0)

    for wire in net.wires:
        layer = tech.layer(wire.layer)
        lo = Point(min(wire.start.x, wire.end.x), min(wire.start.y, wire.end.y))
        hi = Point(max(wire.start.x, wire.end.x), max(wire.start.y, wire.end.y))
        on_wire = sorted(
            p
            for p in points_by_layer[layer.index]
            if lo.x <= p.x <= hi.x and lo.y <= p.y <= hi.y
        )
        for a, b in zip(on_wire, on_wire[1:]):
            length = a.manhattan(b)
            r, c = length * layer.resistance, length * layer.capacitance
            na, nb = (layer.index, a.x, a.y), (layer.index, b.x, b.y)
            link(na, nb, r)
            caps[na] += c / 2
            caps[nb] += c / 2
            wire_r += r
            wire_c += c
    for a, b, r in via_edges:
        link(a, b, r)
    if not adjacency:
        return star_parasitics(design, net, port_loads)

    nodes = sorted(adjacency)

    def nearest(p: Optional[Point]) -> Node:
        if p is None:
            return nodes[0]
        return min(nodes, key=lambda n: (abs(n[1] - p.x) + abs(n[2] - p.y), n))

    root_pin = _root(design, net)
    pin_at = {pin: nearest(design.pin_position(pin)) for pin in net.pins}
    start = pin_at[root_pin] if root_pin is not None else nodes[0]
    order: Dict[Node, int] = {start: 0}
    tree = RcTree(capacitance=[caps[start]])
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v, r in sorted(adjacency[u]):
            if v in order:
                continue
            order[v] = tree.add_node(order[u], r, caps[v])
            queue.append(v)
    for node in nodes:
        if node not in order:
            logger.debug("Net %s: floating routing node %s tied to the driver", net.name, node)
            order[node] = tree.add_node(0, 0.0, caps[node])
    result = NetParasitics(net.name, tree, wire_cap=wire_c, wire_res=wire_r)
    for pin in net.pins:
        node = order[pin_at[pin]]
        result.pin_nodes[pin] = node
        tree.add_cap(node, _pin_cap(design, pin, port_loads))
    return result


def estimate_parasitics(
    design: Design, mode: Mode = "preroute", port_loads: Mapping[str, float] = {}
) -> Dict[str, NetParasitics]:
    """Per-net RC trees keyed by net name; wired clock nets follow their wires in either mode."""

    def builder(net: Net) -> NetParasitics:
        if mode == "postroute" or (net.is_clock and net.wires):
            return routed_parasitics(design, net, port_loads)
        return star_parasitics(design, net, port_loads)

    result = {net.name: builder(net) for net in design.nets}
    logger.debug(
        "Parasitics mode=%s nets=%s wire_cap=%.3f",
        mode,
        len(result),
        sum(p.wire_cap for p in result.values()),
    )
    return result
