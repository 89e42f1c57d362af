"""Timing repair: design-rule (cap/slew), setup and hold fixing on a live timing graph.

Every move is an exact, reversible netlist edit (``insert_buffer``/``undo_buffer``,
``resize_instance``) followed by ``incremental_update``; rejected moves are undone
and re-timed, so the graph always matches a full recomputation.
"""

from __future__ import annotations

import logging
import math
from typing import List, Optional, Sequence, Tuple

from .db import (
    BufferEdit,
    CellMaster,
    Design,
    Instance,
    Net,
    NetPin,
    Orientation,
    Point,
    Rect,
    SiteMap,
    insert_buffer,
    resize_instance,
    undo_buffer,
)
from .errors import NoBufferMaster, NoSizeVariants, UnfixableViolation, UnknownMaster
from .models import FixReport, OptConfig
from .sta import (
    FALL,
    RISE,
    TimingGraph,
    drv_violations,
    incremental_update,
    report_paths,
    timing_summary,
)

logger = logging.getLogger(__name__)

_EPS = 1e-9


def _buffer_master(design: Design, name: str) -> CellMaster:
    try:
        master = design.tech.master(name)
    except UnknownMaster:
        raise NoBufferMaster(name) from None
    if not master.is_buffer:
        raise NoBufferMaster(name, "not a buffer")
    return master


def _centroid(points: Sequence[Point]) -> Point:
    return Point(
        int(round(sum(p.x for p in points) / len(points))),
        int(round(sum(p.y for p in points) / len(points))),
    )


class _Editor:
    """Buffer insertions and resizes that keep the placement legal and can be rolled back."""

    def __init__(self, design: Design, graph: TimingGraph, radius: int):
        self.design = design
        self.graph = graph
        self.radius = radius
        self.sites = SiteMap(design)

    def _changed(self, nets: Sequence[Net]) -> List[str]:
        return [self.design.pin_name(p) for net in nets for p in net.pins]

    def buffer(
        self, net: Net, loads: Sequence[NetPin], master: CellMaster, target: Point, prefix: str
    ) -> Optional[BufferEdit]:
        found = self.sites.nearest_free(
            Point(target.x - master.width // 2, target.y - master.height // 2),
            master.width,
            self.radius,
        )
        if found is None:
            logger.debug("No free site for %s near %s", master.name, target)
            return None
        row, location = found
        inst, new_net, edit = insert_buffer(
            self.design, net, loads, master, location, inst_prefix=prefix
        )
        inst.orient = row.orient
        self.sites.occupy(inst.bbox)
        incremental_update(self.graph, self._changed([net, new_net]))
        return edit

    def undo(self, edit: BufferEdit) -> None:
        design = self.design
        self.sites.release(design.instance(edit.instance).bbox)
        undo_buffer(design, edit)
        incremental_update(self.graph, self._changed([design.net(edit.input_net)]))

    def resize(
        self, inst: Instance, master: CellMaster
    ) -> Optional[Tuple[CellMaster, Point, Orientation]]:
        """Swap masters, sliding to the nearest free sites if the new footprint collides."""
        previous = (inst.master, inst.location, inst.orient)
        self.sites.release(inst.bbox)
        x, y = inst.location.x, inst.location.y
        bbox = Rect(inst.location, Point(x + master.width, y + master.height))
        if not self.sites.is_free(bbox) or not self.design.core.contains(bbox):
            found = self.sites.nearest_free(inst.location, master.width, self.radius)
            if found is None:
                self.sites.occupy(inst.bbox)
                return None
            row, location = found
            inst.location, inst.orient = location, row.orient
        resize_instance(self.design, inst, master)
        self.sites.occupy(inst.bbox)
        incremental_update(self.graph, self._inst_changes(inst))
        return previous

    def restore(self, inst: Instance, previous: Tuple[CellMaster, Point, Orientation]) -> None:
        self.sites.release(inst.bbox)
        master, location, orient = previous
        resize_instance(self.design, inst, master)
        inst.location, inst.orient = location, orient
        self.sites.occupy(inst.bbox)
        incremental_update(self.graph, self._inst_changes(inst))

    def _inst_changes(self, inst: Instance) -> List[str]:
        design = self.design
        nets = [design.net_of(p) for p in design.instance_pins(inst)]
        return self._changed([n for n in nets if n is not None])


# ---------------------------------------------------------------------------
# Design rule violations
# ---------------------------------------------------------------------------


def _split_loads(design: Design, net: Net) -> List[List[NetPin]]:
    """Halve the placed loads along their wider spread."""
    loads = [p for p in design.loads(net) if design.pin_position(p) is not None]
    if len(loads) < 2:
        return [loads] if loads else []
    positions = {p: design.pin_position(p) for p in loads}
    xs = [positions[p].x for p in loads]
    ys = [positions[p].y for p in loads]
    if max(xs) - min(xs) >= max(ys) - min(ys):
        ordered = sorted(loads, key=lambda p: (positions[p].x, positions[p].y, p))
    else:
        ordered = sorted(loads, key=lambda p: (positions[p].y, positions[p].x, p))
    half = len(ordered) // 2
    return [ordered[:half], ordered[half:]]


def fix_drv(design: Design, graph: TimingGraph, cfg: OptConfig = OptConfig()) -> FixReport:
    """Split overloaded nets at load-cluster centroids until cap and slew limits hold."""
    master = _buffer_master(design, cfg.buffer)
    editor = _Editor(design, graph, cfg.search_radius)
    violations = drv_violations(graph)
    report = FixReport(kind="drv", before=len(violations), trajectory=[len(violations)])
    for _ in range(cfg.max_iterations):
        if not violations:
            break
        progress = False
        for name in sorted({v.net for v in violations}):
            if not design.has_net(name):
                continue
            net = design.net(name)
            driver = design.driver(net)
            groups = _split_loads(design, net)
            if driver is None or not groups:
                continue
            kinds = {v.kind for v in violations if v.net == name}
            if len(groups) == 1 and len(groups[0]) == 1 and "cap" in kinds:
                limit = min(v.limit for v in violations if v.net == name and v.kind == "cap")
                if design.pin_capacitance(groups[0][0]) > limit:
                    raise UnfixableViolation(f"net {name}: a single load exceeds max capacitance")
            before = len(violations)
            edits: List[BufferEdit] = []
            origin = design.pin_position(driver) or design.core.center
            for group in groups:
                points = [design.pin_position(p) for p in group]
                target = _centroid(points)
                if len(group) == 1:
                    target = _centroid([origin, points[0]])
                edit = editor.buffer(design.net(name), group, master, target, "drv_buf_")
                if edit is not None:
                    edits.append(edit)
            now = drv_violations(graph)
            if not edits:
                continue
            if len(now) > before:
                for edit in reversed(edits):
                    editor.undo(edit)
                report.reverted += len(edits)
                now = drv_violations(graph)
            else:
                report.moves += len(edits)
                report.buffers_inserted += len(edits)
                progress = True
            violations = now
        report.trajectory.append(len(violations))
        if not progress:
            break
    report.after = len(violations)
    if violations:
        report.notes.extend(f"{v.kind} {v.net} {v.value:.4f}>{v.limit:.4f}" for v in violations)
    logger.info(
        "DRV fix buffers=%s violations %s -> %s",
        report.buffers_inserted,
        report.before,
        report.after,
    )
    return report


# ---------------------------------------------------------------------------
# Setup
# ---------------------------------------------------------------------------


def _has_variants(design: Design) -> bool:
    tech = design.tech
    return any(len(tech.size_variants(m)) > 1 for m in tech.masters.values() if m.timing)


def _sizing_candidates(graph: TimingGraph, path) -> List[Tuple[float, str, Instance, CellMaster]]:
    """(estimated gain, tiebreak, instance, variant) for the driving cells along ``path``."""
    design = graph.design
    tech = design.tech
    found = []
    for prev, stage in zip(path.stages, path.stages[1:]):
        vertex = graph.by_name.get(stage.pin)
        if vertex is None or vertex.pin.instance is None:
            continue
        inst = design.instances[vertex.pin.instance]
        if not design.is_driver(vertex.pin) or inst.is_fixed:
            continue
        related = prev.pin.rsplit("/", 1)[-1]
        if "/" not in prev.pin or not prev.pin.startswith(inst.name + "/"):
            continue
        rise = stage.transition == "rise"
        load = graph.load_of(vertex)
        slew_in = graph.by_name[prev.pin].slew_late[RISE if prev.transition == "rise" else FALL]
        current = _arc(inst.master, vertex.pin.pin, related)
        if current is None:
            continue
        base = current.delay(rise, slew_in, load)
        for variant in tech.size_variants(inst.master):
            if variant is inst.master:
                continue
            arc = _arc(variant, vertex.pin.pin, related)
            if arc is None:
                continue
            gain = base - arc.delay(rise, slew_in, load)
            if gain > _EPS:
                found.append((gain, f"{inst.name}:{variant.name}", inst, variant))
    found.sort(key=lambda item: (-item[0], item[1]))
    return found


def _arc(master: CellMaster, out_pin: str, related: str):
    if master.timing is None or out_pin not in master.timing.pins:
        return None
    for arc in master.timing.pins[out_pin].timing:
        if arc.related_pin == related and not arc.is_constraint:
            return arc
    return None


def _longest_wire(graph: TimingGraph, path) -> Optional[Tuple[int, NetPin, NetPin]]:
    """(length, driver, load) of the longest driver-to-load hop on ``path``."""
    design = graph.design
    best = None
    for prev, stage in zip(path.stages, path.stages[1:]):
        src = graph.by_name.get(prev.pin)
        dst = graph.by_name.get(stage.pin)
        if src is None or dst is None:
            continue
        net = graph.net_of_pin.get(dst.name)
        if net is None or net != graph.net_of_pin.get(src.name):
            continue
        a, b = design.pin_position(src.pin), design.pin_position(dst.pin)
        if a is None or b is None:
            continue
        candidate = (a.manhattan(b), src.pin, dst.pin)
        if best is None or candidate[0] > best[0]:
            best = candidate
    return best


def fix_setup(design: Design, graph: TimingGraph, cfg: OptConfig = OptConfig()) -> FixReport:
    """Greedy upsizing and wire buffering on the worst path; only WNS-improving moves stay."""
    wns = timing_summary(graph).wns
    report = FixReport(kind="setup", before=wns, after=wns, trajectory=[wns])
    if wns >= 0:
        return report
    if not _has_variants(design):
        raise NoSizeVariants("library has no size variants to upsize with")
    master = _buffer_master(design, cfg.buffer)
    editor = _Editor(design, graph, cfg.search_radius)
    for _ in range(cfg.setup_effort):
        if wns >= 0:
            break
        path = report_paths(graph, k=1)[0]
        improved = False
        for _, _, inst, variant in _sizing_candidates(graph, path):
            previous = editor.resize(inst, variant)
            if previous is None:
                continue
            now = timing_summary(graph).wns
            if now > wns + _EPS:
                wns = now
                report.resized += 1
                improved = True
                break
            editor.restore(inst, previous)
            report.reverted += 1
        if not improved:
            hop = _longest_wire(graph, path)
            if hop is not None and hop[0] > 0:
                _, src, dst = hop
                net = design.net_of(dst)
                target = _centroid([design.pin_position(src), design.pin_position(dst)])
                edit = editor.buffer(net, [dst], master, target, "setup_buf_")
                if edit is not None:
                    now = timing_summary(graph).wns
                    if now > wns + _EPS:
                        wns = now
                        report.buffers_inserted += 1
                        improved = True
                    else:
                        editor.undo(edit)
                        report.reverted += 1
        if not improved:
            report.notes.append("no improving move")
            break
        report.moves += 1
        report.trajectory.append(wns)
    report.after = wns
    logger.info("Setup fix moves=%s wns %.4f -> %.4f", report.moves, report.before, report.after)
    return report


# ---------------------------------------------------------------------------
# Hold
# ---------------------------------------------------------------------------


def fix_hold(design: Design, graph: TimingGraph, cfg: OptConfig = OptConfig()) -> FixReport:
    """Delay buffers in front of hold-violating data inputs, guarded by setup slack."""
    master = _buffer_master(design, cfg.hold_buffer)
    editor = _Editor(design, graph, cfg.search_radius)
    summary = timing_summary(graph)
    report = FixReport(kind="hold", before=summary.hold_wns, trajectory=[summary.hold_wns])
    arc = master.timing.delay_arcs()[0]
    in_cap = master.timing.pins[arc.related_pin].capacitance
    nominal = max(arc.delay(True, graph.config.default_input_slew_ns, in_cap), _EPS)
    exhausted = set()
    for _ in range(cfg.max_iterations):
        failing = sorted(
            (check.vertex.hold_slack(), name)
            for name, check in graph.checks.items()
            if check.constrained
            and check.vertex.reached
            and name not in exhausted
            and check.vertex.hold_slack() < cfg.hold_margin_ns - _EPS
        )
        if not failing:
            break
        for slack, name in failing:
            vertex = graph.by_name[name]
            if vertex.pin.instance is None:
                exhausted.add(name)
                report.notes.append(f"SetupBudgetExhausted {name}: output port")
                continue
            deficit = cfg.hold_margin_ns - slack
            for _ in range(max(1, math.ceil(deficit / nominal))):
                vertex = graph.by_name[name]
                pin = vertex.pin
                wns_before = timing_summary(graph).wns
                net = design.net_of(pin)
                location = design.pin_position(pin)
                if net is None or location is None:
                    break
                edit = editor.buffer(net, [pin], master, location, "hold_buf_")
                if edit is None:
                    exhausted.add(name)
                    report.notes.append(f"SetupBudgetExhausted {name}: no free site")
                    break
                vertex = graph.by_name[name]
                wns_now = timing_summary(graph).wns
                if vertex.setup_slack() < 0 or (wns_before >= 0 and wns_now < 0):
                    editor.undo(edit)
                    report.reverted += 1
                    exhausted.add(name)
                    report.notes.append(f"SetupBudgetExhausted {name}")
                    break
                report.buffers_inserted += 1
                report.moves += 1
                if vertex.hold_slack() >= cfg.hold_margin_ns:
                    break
        report.trajectory.append(timing_summary(graph).hold_wns)
    report.after = timing_summary(graph).hold_wns
    logger.info(
        "Hold fix buffers=%s hold_wns %.4f -> %.4f",
        report.buffers_inserted,
        report.before,
        report.after,
    )
    return report
