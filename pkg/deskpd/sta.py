"""Graph-based static timing analysis with NLDM cell delays and Elmore interconnect.

Vertices are pins and ports, named ``inst/pin`` or the port name. Index 0 of every
per-vertex pair is the rise transition, index 1 the fall transition. Times in ns,
capacitance in fF.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Set, Tuple, Union

import networkx as nx

from .db import CellClass, Design, NetPin, PinDirection
from .errors import CombinationalLoop, NoClock
from .liberty import NldmTable, TimingArc
from .models import PathEnd, StaConfig, StageRow, TimingSummary
from .parasitics import Mode, NetParasitics, estimate_parasitics
from .sdc import ClockDef, SdcConstraints

logger = logging.getLogger(__name__)

RISE, FALL = 0, 1
TRANSITIONS = ("rise", "fall")
LN9 = math.log(9.0)
INF = math.inf


def interpolate_nldm(table: NldmTable, slew: float, load: float) -> float:
    """Bilinear lookup inside the grid, clamped to the boundary outside it."""
    return table.lookup(slew, load)


@dataclass(eq=False)
class Vertex:
    name: str
    pin: NetPin
    arr_late: List[float] = field(default_factory=lambda: [-INF, -INF])
    arr_early: List[float] = field(default_factory=lambda: [INF, INF])
    slew_late: List[float] = field(default_factory=lambda: [0.0, 0.0])
    slew_early: List[float] = field(default_factory=lambda: [0.0, 0.0])
    req_late: List[float] = field(default_factory=lambda: [INF, INF])
    req_early: List[float] = field(default_factory=lambda: [-INF, -INF])
    pred_late: List[Optional[Tuple["Vertex", int]]] = field(default_factory=lambda: [None, None])
    pred_early: List[Optional[Tuple["Vertex", int]]] = field(default_factory=lambda: [None, None])
    level: int = 0

    @property
    def reached(self) -> bool:
        return max(self.arr_late) > -INF

    def setup_slack(self) -> float:
        return min(self.req_late[t] - self.arr_late[t] for t in (RISE, FALL))

    def hold_slack(self) -> float:
        return min(self.arr_early[t] - self.req_early[t] for t in (RISE, FALL))

    def _reset(self) -> None:
        self.arr_late = [-INF, -INF]
        self.arr_early = [INF, INF]
        self.slew_late = [0.0, 0.0]
        self.slew_early = [0.0, 0.0]
        self.pred_late = [None, None]
        self.pred_early = [None, None]


@dataclass(eq=False)
class Edge:
    src: Vertex
    dst: Vertex
    net: Optional[str] = None
    arc: Optional[TimingArc] = None
    master: str = ""
    clock: bool = False
    # [tin][tout] -> (delay, slew); computed lazily from the source annotations.
    late: Optional[List[List[Optional[Tuple[float, float]]]]] = None
    early: Optional[List[List[Optional[Tuple[float, float]]]]] = None

    @property
    def is_net(self) -> bool:
        return self.arc is None

    def signature(self) -> Tuple[str, str, str]:
        return (self.src.name, self.master, self.arc.related_pin if self.arc else self.net or "")

    def pairs(self) -> List[Tuple[int, int]]:
        if self.arc is None:
            return [(RISE, RISE), (FALL, FALL)]
        kind = self.arc.timing_type
        if kind == "rising_edge":
            return [(RISE, RISE), (RISE, FALL)]
        if kind == "falling_edge":
            return [(FALL, RISE), (FALL, FALL)]
        if self.arc.unate == "positive_unate":
            return [(RISE, RISE), (FALL, FALL)]
        if self.arc.unate == "negative_unate":
            return [(FALL, RISE), (RISE, FALL)]
        return [(RISE, RISE), (RISE, FALL), (FALL, RISE), (FALL, FALL)]


@dataclass
class Check:
    """Endpoint constraint: FF data pin (with its clock pin) or output port."""

    vertex: Vertex
    clock: Optional[ClockDef]
    clock_vertex: Optional[Vertex] = None
    setup: float = 0.0
    hold: float = 0.0
    output_max: float = 0.0
    output_min: float = 0.0

    @property
    def constrained(self) -> bool:
        if self.clock is None:
            return False
        return self.clock_vertex is None or self.clock_vertex.reached

    def setup_required(self) -> float:
        clock = self.clock
        capture = clock.period
        latency = self.clock_vertex.arr_early[RISE] if self.clock_vertex is not None else 0.0
        return capture + latency - self.setup - self.output_max - clock.setup_uncertainty

    def hold_required(self) -> float:
        clock = self.clock
        latency = self.clock_vertex.arr_late[RISE] if self.clock_vertex is not None else 0.0
        return latency + self.hold - self.output_min + clock.hold_uncertainty


@dataclass
class DrvViolation:
    net: str
    kind: Literal["cap", "slew"]
    value: float
    limit: float


@dataclass
class TimingGraph:
    design: Design
    sdc: SdcConstraints
    config: StaConfig = field(default_factory=StaConfig)
    mode: Mode = "preroute"
    vertices: List[Vertex] = field(default_factory=list)
    by_name: Dict[str, Vertex] = field(default_factory=dict)
    edges: List[Edge] = field(default_factory=list)
    fanin: Dict[str, List[Edge]] = field(default_factory=dict)
    fanout: Dict[str, List[Edge]] = field(default_factory=dict)
    levels: List[List[Vertex]] = field(default_factory=list)
    checks: Dict[str, Check] = field(default_factory=dict)
    clock_of: Dict[str, ClockDef] = field(default_factory=dict)
    ideal_clock: bool = True
    parasitics: Dict[str, NetParasitics] = field(default_factory=dict)
    net_of_pin: Dict[str, str] = field(default_factory=dict)
    unconstrained: List[str] = field(default_factory=list)
    unreachable: List[str] = field(default_factory=list)
    recomputed: Set[str] = field(default_factory=set)

    def vertex(self, name: str) -> Vertex:
        return self.by_name[name]

    def load_of(self, vertex: Vertex) -> float:
        net = self.net_of_pin.get(vertex.name)
        return self.parasitics[net].load_cap if net is not None else 0.0


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def _input_slew(graph: TimingGraph, port: str) -> float:
    return graph.sdc.input_transitions.get(port, graph.config.default_input_slew_ns)


def _build_structure(graph: TimingGraph, previous: Dict[str, Vertex]) -> None:
    """(Re)create vertices, edges and checks from the design; vertex objects are reused by name."""
    design = graph.design
    vertices: List[Vertex] = []
    by_name: Dict[str, Vertex] = {}

    def add(name: str, pin: NetPin) -> Vertex:
        vertex = previous.get(name) or Vertex(name, pin)
        vertex.pin = pin
        vertices.append(vertex)
        by_name[name] = vertex
        return vertex

    for port in design.ports:
        add(port.name, NetPin(None, port.name))
    for inst in design.instances:
        if inst.master.cls == CellClass.FILLER:
            continue
        for mpin in inst.master.signal_pins():
            add(f"{inst.name}/{mpin.name}", NetPin(inst.id, mpin.name))

    edges: List[Edge] = []
    net_of_pin: Dict[str, str] = {}
    for net in design.nets:
        for pin in net.pins:
            net_of_pin[design.pin_name(pin)] = net.name
        driver = design.driver(net)
        if driver is None:
            continue
        src = by_name.get(design.pin_name(driver))
        if src is None:
            continue
        for load in net.pins:
            if load == driver:
                continue
            dst = by_name.get(design.pin_name(load))
            if dst is not None:
                edges.append(Edge(src, dst, net=net.name))
    for inst in design.instances:
        timing = inst.master.timing
        if timing is None:
            continue
        for arc in timing.delay_arcs():
            src = by_name.get(f"{inst.name}/{arc.related_pin}")
            dst = by_name.get(f"{inst.name}/{arc.pin}")
            if src is not None and dst is not None:
                edges.append(Edge(src, dst, arc=arc, master=inst.master.name))

    graph.vertices = vertices
    graph.by_name = by_name
    graph.edges = edges
    graph.net_of_pin = net_of_pin
    graph.fanin = {v.name: [] for v in vertices}
    graph.fanout = {v.name: [] for v in vertices}
    for edge in edges:
        graph.fanin[edge.dst.name].append(edge)
        graph.fanout[edge.src.name].append(edge)

    digraph = nx.DiGraph()
    digraph.add_nodes_from(v.name for v in vertices)
    digraph.add_edges_from((e.src.name, e.dst.name) for e in edges)
    if not nx.is_directed_acyclic_graph(digraph):
        cycle = nx.find_cycle(digraph)
        raise CombinationalLoop([u for u, _ in cycle])
    graph.levels = []
    for depth, generation in enumerate(nx.topological_generations(digraph)):
        level = [by_name[name] for name in sorted(generation)]
        for vertex in level:
            vertex.level = depth
        graph.levels.append(level)

    _mark_clock_network(graph)
    _build_checks(graph)


def _mark_clock_network(graph: TimingGraph) -> None:
    """Tag edges and vertices reachable from clock sources, stopping at sequential clock pins."""
    design = graph.design
    graph.clock_of = {}
    frontier: List[Tuple[Vertex, ClockDef]] = []
    for source, clock in sorted(graph.sdc.clock_sources().items()):
        vertex = graph.by_name.get(source)
        if vertex is not None:
            frontier.append((vertex, clock))
    buffered = False
    while frontier:
        vertex, clock = frontier.pop()
        if vertex.name in graph.clock_of:
            continue
        graph.clock_of[vertex.name] = clock
        pin = vertex.pin
        if pin.instance is not None:
            master = design.instances[pin.instance].master
            if master.is_sequential and design.pin_direction(pin) == PinDirection.INPUT:
                continue
            if design.pin_direction(pin) == PinDirection.OUTPUT:
                buffered = True
        for edge in graph.fanout[vertex.name]:
            edge.clock = True
            frontier.append((edge.dst, clock))
    graph.ideal_clock = not buffered


def _build_checks(graph: TimingGraph) -> None:
    design = graph.design
    sdc = graph.sdc
    graph.checks = {}
    default_clock = sdc.clocks[0] if sdc.clocks else None
    for inst in design.instances:
        timing = inst.master.timing
        if timing is None or not timing.is_sequential:
            continue
        clock_pin = timing.clock_pin()
        ck = graph.by_name.get(f"{inst.name}/{clock_pin}") if clock_pin else None
        clock = graph.clock_of.get(ck.name) if ck is not None else None
        for lpin in timing.pins.values():
            if lpin.direction != "input" or lpin.name == clock_pin:
                continue
            vertex = graph.by_name.get(f"{inst.name}/{lpin.name}")
            if vertex is None:
                continue
            check = Check(vertex, clock, ck)
            for arc in lpin.timing:
                if arc.is_constraint:
                    if arc.is_setup:
                        check.setup = arc.constraint_value()
                    else:
                        check.hold = arc.constraint_value()
            graph.checks[vertex.name] = check
    for port in design.ports:
        if port.direction != PinDirection.OUTPUT:
            continue
        delay = sdc.output_delays.get(port.name)
        vertex = graph.by_name[port.name]
        if delay is None:
            graph.checks[port.name] = Check(vertex, None)
            continue
        clock = sdc.clock(delay.clock) if delay.clock else default_clock
        graph.checks[port.name] = Check(
            vertex, clock, None, output_max=delay.max, output_min=delay.min
        )
    graph.unconstrained = sorted(name for name, c in graph.checks.items() if c.clock is None)


def build_timing_graph(
    design: Design,
    sdc: SdcConstraints,
    config: StaConfig = StaConfig(),
    mode: Optional[Mode] = None,
) -> TimingGraph:
    """Levelized timing DAG; clock-to-output arcs are the only way through a flip-flop."""
    if not sdc.clocks:
        raise NoClock("SDC defines no clock")
    if mode is None:
        routed = any(net.wires and not net.is_clock for net in design.nets)
        mode = "postroute" if routed else "preroute"
    graph = TimingGraph(design=design, sdc=sdc, config=config, mode=mode)
    _build_structure(graph, {})
    graph.parasitics = estimate_parasitics(design, mode, sdc.loads)
    logger.info(
        "Timing graph vertices=%s edges=%s levels=%s mode=%s clock=%s",
        len(graph.vertices),
        len(graph.edges),
        len(graph.levels),
        mode,
        "ideal" if graph.ideal_clock else "propagated",
    )
    return graph


# ---------------------------------------------------------------------------
# Propagation
# ---------------------------------------------------------------------------


def _edge_timing(
    graph: TimingGraph, edge: Edge, early: bool
) -> List[List[Optional[Tuple[float, float]]]]:
    cached = edge.early if early else edge.late
    if cached is not None:
        return cached
    src = edge.src
    slews = src.slew_early if early else src.slew_late
    table: List[List[Optional[Tuple[float, float]]]] = [[None, None], [None, None]]
    ideal = graph.ideal_clock and edge.clock
    if edge.arc is None:
        wire = 0.0 if ideal else graph.parasitics[edge.net].delay_to(edge.dst.pin)
        for tin, tout in edge.pairs():
            slew = slews[tin] if ideal else math.sqrt(slews[tin] ** 2 + (LN9 * wire) ** 2)
            table[tin][tout] = (wire, slew)
    else:
        load = graph.load_of(edge.dst)
        for tin, tout in edge.pairs():
            if ideal:
                table[tin][tout] = (0.0, slews[tin])
                continue
            rise = tout == RISE
            table[tin][tout] = (
                edge.arc.delay(rise, slews[tin], load),
                edge.arc.transition(rise, slews[tin], load),
            )
    if early:
        edge.early = table
    else:
        edge.late = table
    return table


def _seed_startpoint(graph: TimingGraph, vertex: Vertex) -> bool:
    """Primary inputs and clock sources; returns True when ``vertex`` is one."""
    pin = vertex.pin
    if pin.instance is not None:
        return False
    port = graph.design.port(pin.pin)
    if port.direction != PinDirection.INPUT:
        return False
    slew = _input_slew(graph, port.name)
    if port.name in graph.sdc.clock_sources():
        late = early = 0.0
    else:
        delay = graph.sdc.input_delays.get(port.name)
        late = delay.max if delay is not None else 0.0
        early = delay.min if delay is not None else 0.0
    vertex.arr_late = [late, late]
    vertex.arr_early = [early, early]
    vertex.slew_late = [slew, slew]
    vertex.slew_early = [slew, slew]
    return True


def _compute_forward(graph: TimingGraph, vertex: Vertex) -> None:
    vertex._reset()
    if _seed_startpoint(graph, vertex):
        return
    slew_early: List[float] = [INF, INF]
    for edge in graph.fanin[vertex.name]:
        src = edge.src
        if not src.reached:
            continue
        edge.late = edge.early = None
        late = _edge_timing(graph, edge, early=False)
        early = _edge_timing(graph, edge, early=True)
        for tin, tout in edge.pairs():
            delay, slew = late[tin][tout]
            arrival = src.arr_late[tin] + delay
            if arrival > vertex.arr_late[tout]:
                vertex.arr_late[tout] = arrival
                vertex.pred_late[tout] = (src, tin)
            vertex.slew_late[tout] = max(vertex.slew_late[tout], slew)
            delay, slew = early[tin][tout]
            arrival = src.arr_early[tin] + delay
            if arrival < vertex.arr_early[tout]:
                vertex.arr_early[tout] = arrival
                vertex.pred_early[tout] = (src, tin)
            slew_early[tout] = min(slew_early[tout], slew)
    vertex.slew_early = [s if s < INF else 0.0 for s in slew_early]


def _compute_backward(graph: TimingGraph, vertex: Vertex) -> None:
    check = graph.checks.get(vertex.name)
    if check is not None and check.constrained:
        setup = check.setup_required()
        hold = check.hold_required()
        vertex.req_late = [setup, setup]
        vertex.req_early = [hold, hold]
        return
    req_late = [INF, INF]
    req_early = [-INF, -INF]
    if not vertex.reached:
        vertex.req_late, vertex.req_early = req_late, req_early
        return
    for edge in graph.fanout[vertex.name]:
        dst = edge.dst
        late = _edge_timing(graph, edge, early=False)
        early = _edge_timing(graph, edge, early=True)
        for tin, tout in edge.pairs():
            req_late[tin] = min(req_late[tin], dst.req_late[tout] - late[tin][tout][0])
            req_early[tin] = max(req_early[tin], dst.req_early[tout] - early[tin][tout][0])
    vertex.req_late = req_late
    vertex.req_early = req_early


def _forward(graph: TimingGraph, names: Optional[Set[str]]) -> None:
    for level in graph.levels:
        for vertex in level:
            if names is None or vertex.name in names:
                _compute_forward(graph, vertex)


def _backward(graph: TimingGraph, names: Optional[Set[str]]) -> None:
    for level in reversed(graph.levels):
        for vertex in level:
            if names is None or vertex.name in names:
                _compute_backward(graph, vertex)


def _finish(graph: TimingGraph) -> None:
    graph.unreachable = sorted(v.name for v in graph.vertices if not v.reached)
    graph.unconstrained = sorted(
        name for name, check in graph.checks.items() if not check.constrained
    )
    if graph.unconstrained:
        logger.debug("Unconstrained endpoints: %s", ", ".join(graph.unconstrained))


def propagate(graph: TimingGraph) -> TimingGraph:
    """Full forward (arrival, slew) and backward (required) passes in level order."""
    _forward(graph, None)
    _backward(graph, None)
    graph.recomputed = {v.name for v in graph.vertices}
    _finish(graph)
    summary = timing_summary(graph)
    logger.info(
        "STA propagated wns=%.4f tns=%.4f hold_wns=%.4f endpoints=%s unconstrained=%s",
        summary.wns,
        summary.tns,
        summary.hold_wns,
        summary.endpoints,
        len(summary.unconstrained),
    )
    return graph


def _pin_names(graph: TimingGraph, pins: Iterable[Union[str, NetPin]]) -> Set[str]:
    names: Set[str] = set()
    for pin in pins:
        if isinstance(pin, NetPin):
            try:
                names.add(graph.design.pin_name(pin))
            except (IndexError, KeyError):
                continue
        else:
            names.add(pin)
    return names


def _closure(start: Set[str], step: Dict[str, List[Edge]], forward: bool) -> Set[str]:
    seen = set(start)
    stack = list(start)
    while stack:
        name = stack.pop()
        for edge in step.get(name, ()):
            nxt = edge.dst.name if forward else edge.src.name
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def _check_key(check: Check) -> tuple:
    return (
        check.clock.name if check.clock else None,
        check.clock_vertex.name if check.clock_vertex else None,
        check.setup,
        check.hold,
        check.output_max,
        check.output_min,
    )


def incremental_update(
    graph: TimingGraph, changed_pins: Iterable[Union[str, NetPin]] = ()
) -> TimingGraph:
    """Re-time only the fanout cone of what changed; equal to a full propagate.

    Besides ``changed_pins``, every pin of a net whose parasitics changed and every vertex
    whose fan-in changed (new vertex, new arc, different master) seeds the cone.
    """
    old_fanin = {
        name: [e.signature() for e in edges] for name, edges in graph.fanin.items()
    }
    old_parasitics = graph.parasitics
    old_checks = {name: _check_key(c) for name, c in graph.checks.items()}
    old_ideal = graph.ideal_clock
    _build_structure(graph, dict(graph.by_name))
    graph.parasitics = estimate_parasitics(graph.design, graph.mode, graph.sdc.loads)
    if graph.ideal_clock != old_ideal:
        return propagate(graph)

    seeds = _pin_names(graph, changed_pins) & set(graph.by_name)
    for net in graph.design.nets:
        if old_parasitics.get(net.name) != graph.parasitics[net.name]:
            seeds.update(graph.design.pin_name(p) for p in net.pins)
    for name, edges in graph.fanin.items():
        if old_fanin.get(name) != [e.signature() for e in edges]:
            seeds.add(name)
    seeds &= set(graph.by_name)
    cone = _closure(seeds, graph.fanout, forward=True)
    _forward(graph, cone)
    # Requireds depend on downstream requireds and on capture clock arrivals.
    ends = {
        name
        for name, check in graph.checks.items()
        if name in cone
        or old_checks.get(name) != _check_key(check)
        or (check.clock_vertex is not None and check.clock_vertex.name in cone)
    }
    backward = _closure(cone | ends | seeds, graph.fanin, forward=False)
    _backward(graph, backward)
    graph.recomputed = cone
    _finish(graph)
    logger.debug(
        "Incremental STA seeds=%s forward=%s backward=%s", len(seeds), len(cone), len(backward)
    )
    return graph


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def timing_summary(graph: TimingGraph) -> TimingSummary:
    setup: Dict[str, float] = {}
    hold: Dict[str, float] = {}
    for name, check in sorted(graph.checks.items()):
        if not check.constrained or not check.vertex.reached:
            continue
        setup[name] = check.vertex.setup_slack()
        hold[name] = check.vertex.hold_slack()
    wns = min(setup.values()) if setup else 0.0
    hold_wns = min(hold.values()) if hold else 0.0
    return TimingSummary(
        wns=wns,
        tns=sum(s for s in setup.values() if s < 0),
        hold_wns=hold_wns,
        hold_tns=sum(s for s in hold.values() if s < 0),
        endpoints=len(setup),
        unconstrained=list(graph.unconstrained),
        endpoint_slack=setup,
    )


def _trace(
    graph: TimingGraph, vertex: Vertex, transition: int, early: bool
) -> List[Tuple[Vertex, int]]:
    """Worst-predecessor backtrack; stops at a clock-network pin (the launching clock pin)."""
    path = [(vertex, transition)]
    seen = {vertex.name}
    while True:
        current, t = path[-1]
        if current.name in graph.clock_of:
            break
        pred = (current.pred_early if early else current.pred_late)[t]
        if pred is None or pred[0].name in seen:
            break
        seen.add(pred[0].name)
        path.append(pred)
    path.reverse()
    return path


def report_paths(
    graph: TimingGraph, k: int = 1, mode: Literal["setup", "hold"] = "setup"
) -> List[PathEnd]:
    """Worst ``k`` endpoints, each expanded to its single worst path."""
    early = mode == "hold"
    ends: List[Tuple[float, str, Check]] = []
    for name, check in graph.checks.items():
        vertex = check.vertex
        if not check.constrained or not vertex.reached:
            continue
        slack = vertex.hold_slack() if early else vertex.setup_slack()
        ends.append((slack, name, check))
    ends.sort(key=lambda item: (item[0], item[1]))
    reports: List[PathEnd] = []
    for slack, name, check in ends[:k]:
        vertex = check.vertex
        if early:
            t = min((RISE, FALL), key=lambda tr: (vertex.arr_early[tr] - vertex.req_early[tr], tr))
            arrival = vertex.arr_early[t]
            required = vertex.req_early[t]
        else:
            t = min((RISE, FALL), key=lambda tr: (vertex.req_late[tr] - vertex.arr_late[tr], tr))
            arrival = vertex.arr_late[t]
            required = vertex.req_late[t]
        stages: List[StageRow] = []
        previous = 0.0
        for node, tr in _trace(graph, vertex, t, early):
            at = node.arr_early[tr] if early else node.arr_late[tr]
            slew = node.slew_early[tr] if early else node.slew_late[tr]
            stages.append(
                StageRow(
                    pin=node.name,
                    transition=TRANSITIONS[tr],
                    delay=at - previous,
                    slew=slew,
                    arrival=at,
                )
            )
            previous = at
        reports.append(
            PathEnd(
                endpoint=name,
                startpoint=stages[0].pin if stages else name,
                mode=mode,
                launch_edge=0.0,
                capture_edge=0.0 if early else check.clock.period,
                arrival=arrival,
                required=required,
                slack=slack,
                stages=stages,
            )
        )
    return reports


def drv_violations(graph: TimingGraph, include_clock: bool = False) -> List[DrvViolation]:
    """Max-capacitance and max-transition violations per driven net."""
    design = graph.design
    library = design.tech.liberty
    sdc = graph.sdc
    found: List[DrvViolation] = []
    for net in design.nets:
        if net.is_clock and not include_clock:
            continue
        driver = design.driver(net)
        if driver is None or driver.instance is None:
            continue
        timing = design.instances[driver.instance].master.timing
        lpin = timing.pins.get(driver.pin) if timing is not None else None
        cap_limits = [x for x in (sdc.max_capacitance, lpin.max_capacitance if lpin else None) if x]
        slew_limits = [
            x
            for x in (
                sdc.max_transition,
                lpin.max_transition if lpin else None,
                library.default_max_transition if library else None,
            )
            if x
        ]
        load = graph.parasitics[net.name].load_cap
        if cap_limits and load > min(cap_limits) + 1e-12:
            found.append(DrvViolation(net.name, "cap", load, min(cap_limits)))
        if slew_limits:
            slews = [
                max(graph.by_name[design.pin_name(p)].slew_late)
                for p in net.pins
                if design.pin_name(p) in graph.by_name
            ]
            worst = max(slews) if slews else 0.0
            if worst > min(slew_limits) + 1e-12:
                found.append(DrvViolation(net.name, "slew", worst, min(slew_limits)))
    return found


def format_timing_report(paths: Sequence[PathEnd], summary: TimingSummary) -> str:
    """Fixed-column text report: summary block followed by one table per path."""
    lines = [
        f"wns {summary.wns:.4f}  tns {summary.tns:.4f}  "
        f"hold_wns {summary.hold_wns:.4f}  hold_tns {summary.hold_tns:.4f}  "
        f"endpoints {summary.endpoints}",
    ]
    if summary.unconstrained:
        lines.append(f"unconstrained: {' '.join(summary.unconstrained)}")
    for path in paths:
        lines += [
            "",
            f"Startpoint: {path.startpoint}",
            f"Endpoint:   {path.endpoint}",
            f"Check:      {path.mode}",
            f"{'Pin':<32} {'Tr':<4} {'Delay':>9} {'Slew':>9} {'Arrival':>9}",
        ]
        for stage in path.stages:
            lines.append(
                f"{stage.pin:<32} {stage.transition[0]:<4} {stage.delay:>9.4f} "
                f"{stage.slew:>9.4f} {stage.arrival:>9.4f}"
            )
        lines += [
            f"{'data arrival':<32} {'':<4} {'':>9} {'':>9} {path.arrival:>9.4f}",
            f"{'required':<32} {'':<4} {'':>9} {'':>9} {path.required:>9.4f}",
            f"{'slack':<32} {'':<4} {'':>9} {'':>9} {path.slack:>9.4f}",
        ]
    return "\n".join(lines) + "\n"
