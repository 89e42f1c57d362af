"""Row legalization, detailed placement, filler insertion and the placement checker."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .db import (
    BlockageKind,
    CellMaster,
    Design,
    Instance,
    IntegrityViolation,
    Net,
    PinUse,
    PlacementStatus,
    Point,
    Row,
    SiteMap,
    SpatialIndex,
    ViolationKind,
    row_check,
    rows_by_y,
)
from .errors import NoFillerMasters, PreconditionViolated, RowOverflow
from .evaluate import net_hpwl, total_hpwl
from .models import PlacerConfig

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Abacus
# ---------------------------------------------------------------------------


@dataclass
class _Cluster:
    x: float
    weight: float
    q: float
    width: int
    cells: List[Instance] = field(default_factory=list)


@dataclass
class _Segment:
    """A free interval of one row; clusters are kept left to right."""

    row: Row
    x0: int
    x1: int
    used: int = 0
    clusters: List[_Cluster] = field(default_factory=list)

    def snap(self, x: float, width: int) -> int:
        sw = self.row.site.width
        k = int((x - self.x0) / sw + 0.5) if x >= self.x0 else 0
        return min(max(self.x0 + k * sw, self.x0), self.x1 - width)

    def _collapse(self, clusters: List[_Cluster]) -> None:
        while True:
            last = clusters[-1]
            last.x = self.snap(last.q / last.weight, last.width)
            if len(clusters) < 2:
                return
            prev = clusters[-2]
            if prev.x + prev.width <= last.x:
                return
            prev.q += last.q - last.weight * prev.width
            prev.weight += last.weight
            prev.width += last.width
            prev.cells.extend(last.cells)
            clusters.pop()

    def trial(self, inst: Instance, desired_x: float) -> int:
        """x that ``inst`` would get if appended now; clusters are left untouched."""
        weight, q, width = 1.0, desired_x, inst.width
        k = len(self.clusters) - 1
        if k >= 0 and self.clusters[k].x + self.clusters[k].width > desired_x:
            last = self.clusters[k]
            weight = last.weight + 1.0
            q = last.q + desired_x - last.width
            width = last.width + width
            k -= 1
        while True:
            x = self.snap(q / weight, width)
            if k >= 0 and self.clusters[k].x + self.clusters[k].width > x:
                prev = self.clusters[k]
                q = prev.q + q - weight * prev.width
                weight += prev.weight
                width += prev.width
                k -= 1
                continue
            return x + width - inst.width

    def place(self, inst: Instance, desired_x: float) -> None:
        """Abacus insertion at the right end of the segment."""
        clusters = self.clusters
        if clusters and clusters[-1].x + clusters[-1].width > desired_x:
            last = clusters[-1]
            last.q += desired_x - last.width
            last.weight += 1.0
            last.width += inst.width
            last.cells.append(inst)
        else:
            clusters.append(_Cluster(desired_x, 1.0, desired_x, inst.width, [inst]))
        self._collapse(clusters)
        self.used += inst.width


def _segments(design: Design) -> List[_Segment]:
    blocked = [
        inst.bbox for inst in design.instances if inst.is_placed and not inst.is_movable
    ] + [b.rect for b in design.blockages if b.kind == BlockageKind.PLACEMENT]
    segments: List[_Segment] = []
    for row in sorted(design.rows, key=lambda r: (r.origin.y, r.origin.x)):
        cuts: List[Tuple[int, int]] = []
        for rect in blocked:
            if rect.ll.y < row.origin.y + row.height and rect.ur.y > row.origin.y:
                cuts.append((rect.ll.x, rect.ur.x))
        sw = row.site.width
        x = row.origin.x
        for lo, hi in sorted(cuts):
            start = row.origin.x + max(0, -(-(x - row.origin.x) // sw)) * sw
            end = row.origin.x + ((lo - row.origin.x) // sw) * sw
            if end > start:
                segments.append(_Segment(row, start, min(end, row.end_x)))
            x = max(x, hi)
        start = row.origin.x + max(0, -(-(x - row.origin.x) // sw)) * sw
        if row.end_x > start:
            segments.append(_Segment(row, start, row.end_x))
    return segments


def legalize(design: Design) -> Design:
    """Abacus legalization: cells in x order go to the row segment of least squared displacement."""
    if not design.rows:
        raise PreconditionViolated("floorplan initialized", "legalize")
    cells = [inst for inst in design.instances if inst.is_movable]
    if any(not inst.is_placed for inst in cells):
        raise PreconditionViolated("global placement done", "legalize")
    segments = _segments(design)
    by_row: Dict[int, List[_Segment]] = {}
    for seg in segments:
        by_row.setdefault(seg.row.origin.y, []).append(seg)
    row_ys = sorted(by_row)
    cells.sort(key=lambda inst: (inst.location.x, inst.id))
    origin = {inst.id: inst.location for inst in cells}
    for inst in cells:
        target = origin[inst.id]
        ranked = sorted(row_ys, key=lambda y: (abs(y - target.y), y))
        best: Optional[Tuple[float, int, _Segment]] = None
        for y in ranked:
            dy = float(y - target.y)
            if best is not None and dy * dy >= best[0]:
                break
            for seg in by_row[y]:
                if seg.used + inst.width > seg.x1 - seg.x0:
                    continue
                x = seg.trial(inst, float(target.x))
                cost = (x - target.x) ** 2 + dy * dy
                if best is None or cost < best[0]:
                    best = (cost, x, seg)
        if best is None:
            raise RowOverflow(f"no row segment can take {inst.name} (width {inst.width})")
        best[2].place(inst, float(target.x))
    displacement = 0
    for seg in segments:
        for cluster in seg.clusters:
            x = int(cluster.x)
            for inst in cluster.cells:
                inst.location = Point(x, seg.row.origin.y)
                inst.orient = seg.row.orient
                x += inst.width
    for inst in cells:
        displacement += inst.location.manhattan(origin[inst.id])
    logger.info("Legalized cells=%s displacement=%s", len(cells), displacement)
    return design


# ---------------------------------------------------------------------------
# Detailed placement
# ---------------------------------------------------------------------------


def _nets_of(design: Design, insts: Iterable[Instance]) -> List[Net]:
    seen: Dict[int, Net] = {}
    for inst in insts:
        for pin in design.instance_pins(inst):
            net = design.net_of(pin)
            if net is not None and net.use == PinUse.SIGNAL:
                seen[net.id] = net
    return [seen[k] for k in sorted(seen)]


def _cost(design: Design, nets: Sequence[Net]) -> int:
    return sum(net_hpwl(design, net) for net in nets)


def _try(design: Design, moves: Sequence[Tuple[Instance, Point]]) -> int:
    """Apply ``moves`` if they shorten the affected nets; returns the gain."""
    insts = [inst for inst, _ in moves]
    nets = _nets_of(design, insts)
    before = _cost(design, nets)
    previous = [(inst, inst.location) for inst in insts]
    for inst, loc in moves:
        inst.location = loc
    gain = before - _cost(design, nets)
    if gain <= 0:
        for inst, loc in previous:
            inst.location = loc
        return 0
    return gain


def _row_cells(design: Design) -> Dict[int, List[Instance]]:
    rows: Dict[int, List[Instance]] = {}
    for inst in design.instances:
        if inst.is_movable and inst.is_placed:
            rows.setdefault(inst.location.y, []).append(inst)
    for cells in rows.values():
        cells.sort(key=lambda inst: (inst.location.x, inst.id))
    return rows


def _swap_pass(design: Design, window: int) -> int:
    gain = 0
    rows = _row_cells(design)
    for y in sorted(rows):
        cells = rows[y]
        for i in range(len(cells)):
            for j in range(i + 1, min(len(cells), i + 1 + window)):
                a, b = cells[i], cells[j]
                if j == i + 1:
                    # Adjacent: keep the span, swap the order.
                    right = b.location.x + b.width
                    moves = [(b, Point(a.location.x, y)), (a, Point(right - a.width, y))]
                elif a.width == b.width:
                    moves = [(a, b.location), (b, a.location)]
                else:
                    continue
                g = _try(design, moves)
                if g:
                    gain += g
                    cells[i], cells[j] = cells[j], cells[i]
    return gain


def _reorder_pass(design: Design) -> int:
    """Exhaustive reordering of every abutting triple of cells."""
    gain = 0
    rows = _row_cells(design)
    for y in sorted(rows):
        cells = rows[y]
        for i in range(len(cells) - 2):
            group = cells[i : i + 3]
            if any(
                group[k].location.x + group[k].width != group[k + 1].location.x for k in range(2)
            ):
                continue
            start = group[0].location.x
            nets = _nets_of(design, group)
            base = _cost(design, nets)
            best: Tuple[int, Optional[Tuple[Instance, ...]]] = (base, None)
            original = [inst.location for inst in group]
            for perm in itertools.permutations(group):
                if list(perm) == group:
                    continue
                x = start
                for inst in perm:
                    inst.location = Point(x, y)
                    x += inst.width
                cost = _cost(design, nets)
                if cost < best[0]:
                    best = (cost, perm)
            if best[1] is None:
                for inst, loc in zip(group, original):
                    inst.location = loc
                continue
            x = start
            for inst in best[1]:
                inst.location = Point(x, y)
                x += inst.width
            gain += base - best[0]
            cells[i : i + 3] = list(best[1])
    return gain


def _optimal_point(design: Design, inst: Instance) -> Optional[Point]:
    """Median of the bounding-box bounds of the cell's nets, excluding the cell itself."""
    xs: List[int] = []
    ys: List[int] = []
    for pin in design.instance_pins(inst):
        net = design.net_of(pin)
        if net is None or net.is_clock:
            continue
        points = [
            design.pin_position(p) for p in net.pins if p.instance != inst.id
        ]
        points = [p for p in points if p is not None]
        if not points:
            continue
        xs += [min(p.x for p in points), max(p.x for p in points)]
        ys += [min(p.y for p in points), max(p.y for p in points)]
    if not xs:
        return None
    xs.sort()
    ys.sort()
    mid = len(xs) // 2
    return Point(xs[mid] - inst.width // 2, ys[mid] - inst.height // 2)


def _shift_pass(design: Design, sites: SiteMap, radius: int) -> int:
    gain = 0
    for inst in design.instances:
        if not (inst.is_movable and inst.is_placed):
            continue
        target = _optimal_point(design, inst)
        if target is None or target == inst.location:
            continue
        sites.release(inst.bbox)
        found = sites.nearest_free(target, inst.width, radius)
        if found is not None and found[1] != inst.location:
            row, loc = found
            nets = _nets_of(design, [inst])
            before = _cost(design, nets)
            previous = (inst.location, inst.orient)
            inst.location, inst.orient = loc, row.orient
            delta = before - _cost(design, nets)
            if delta > 0:
                gain += delta
            else:
                inst.location, inst.orient = previous
        sites.occupy(inst.bbox)
    return gain


def detailed_place(design: Design, cfg: PlacerConfig = PlacerConfig(), window: int = 3) -> Design:
    """Greedy swaps, triple reordering and shifts to free sites; HPWL never increases."""
    before = total_hpwl(design)
    passes = 0
    for passes in range(1, cfg.detailed_passes + 1):
        gain = _swap_pass(design, window)
        gain += _reorder_pass(design)
        gain += _shift_pass(design, SiteMap(design), radius=window * 3)
        logger.debug("Detailed pass=%s gain=%s", passes, gain)
        if gain == 0:
            break
    logger.info(
        "Detailed placement passes=%s hpwl_before=%s hpwl_after=%s",
        passes,
        before,
        total_hpwl(design),
    )
    return design


# ---------------------------------------------------------------------------
# Fillers and checker
# ---------------------------------------------------------------------------


def insert_fillers(design: Design, filler_masters: Optional[Sequence[CellMaster]] = None) -> Design:
    """Tile every row gap greedily with the widest fillers first."""
    masters = list(filler_masters) if filler_masters is not None else design.tech.filler_masters()
    if not masters:
        raise NoFillerMasters("no CORE SPACER masters available")
    masters.sort(key=lambda m: (-m.width, m.name))
    sites = SiteMap(design)
    count = 0
    residual_total = 0
    for idx, row in enumerate(sites.rows):
        occupied = sites._occupied[idx]
        sw = row.site.width
        k = 0
        while k < row.count:
            if occupied[k]:
                k += 1
                continue
            end = k
            while end < row.count and not occupied[end]:
                end += 1
            gap = end - k
            pos = k
            for master in masters:
                width_sites = -(-master.width // sw)
                while gap >= width_sites:
                    name = design.unique_name(f"FILLER_{row.name}_{pos}_")
                    design.add_instance(
                        name,
                        master,
                        Point(row.origin.x + pos * sw, row.origin.y),
                        orient=row.orient,
                        status=PlacementStatus.FIXED,
                    )
                    count += 1
                    pos += width_sites
                    gap -= width_sites
            if gap:
                residual_total += gap
                message = f"row {row.name}: {gap} site(s) left unfilled at site {pos}"
                design.warnings.append(message)
                logger.warning(message)
            k = end
    logger.info("Inserted fillers=%s residual_sites=%s", count, residual_total)
    return design


def check_placement(design: Design) -> List[IntegrityViolation]:
    """Overlaps (one record per pair), off-row/off-site, out-of-core and unplaced movables."""
    violations: List[IntegrityViolation] = []
    table = rows_by_y(design)
    for inst in design.instances:
        if not inst.is_placed:
            if inst.is_movable:
                violations.append(IntegrityViolation(ViolationKind.UNPLACED, inst.name))
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
    index = SpatialIndex(design)
    reported: Set[Tuple[int, int]] = set()
    for inst in design.instances:
        if not inst.is_placed:
            continue
        for other in index.query(inst.bbox):
            if other.id <= inst.id or (inst.id, other.id) in reported:
                continue
            if inst.bbox.overlap_area(other.bbox) > 0:
                reported.add((inst.id, other.id))
                violations.append(
                    IntegrityViolation(ViolationKind.OVERLAP, f"{inst.name},{other.name}")
                )
    return violations
