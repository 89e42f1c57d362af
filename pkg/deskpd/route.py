"""Global routing over a GCell grid.

Pipeline: resource grid -> Steiner topologies -> planar pattern/maze routing with
negotiated congestion -> layer assignment -> guides -> track assignment and final
wires written into the design's nets.

Planar edge keys: ``("h", i, j)`` joins GCells (i, j) and (i + 1, j);
``("v", i, j)`` joins (i, j) and (i, j + 1).
"""

from __future__ import annotations

import heapq
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .db import (
    BlockageKind,
    CellClass,
    Design,
    Instance,
    Layer,
    Net,
    NetPin,
    Orientation,
    Point,
    Rect,
    Via,
    Wire,
)
from .errors import ConfigError, PreconditionViolated, Unroutable
from .evaluate import congestion_map
from .models import RouterConfig
from .steiner import GridPoint, SteinerTree, rsmt

logger = logging.getLogger(__name__)

EdgeKey = Tuple[str, int, int]

_BLOCKED_COST = 1000.0
_LAYER_OVERFLOW_COST = 100.0
_CONGESTION_WEIGHT = 1e-3
_MAZE_MARGIN = 10


# ---------------------------------------------------------------------------
# Resource grid
# ---------------------------------------------------------------------------


@dataclass
class RouteGrid:
    extent: Rect
    gcell: int
    nx: int
    ny: int
    layers: List[Layer]
    layer_capacity: List[np.ndarray]
    layer_demand: List[np.ndarray]
    tracks: List[np.ndarray]
    h_capacity: np.ndarray
    v_capacity: np.ndarray
    h_demand: np.ndarray
    v_demand: np.ndarray
    h_history: np.ndarray
    v_history: np.ndarray

    def gcell_of(self, p: Point) -> GridPoint:
        i = (p.x - self.extent.ll.x) // self.gcell
        j = (p.y - self.extent.ll.y) // self.gcell
        return min(max(i, 0), self.nx - 1), min(max(j, 0), self.ny - 1)

    def gcell_rect(self, cell: GridPoint) -> Rect:
        ll = self.extent.ll
        x0, y0 = ll.x + cell[0] * self.gcell, ll.y + cell[1] * self.gcell
        return Rect(
            Point(x0, y0),
            Point(min(x0 + self.gcell, self.extent.ur.x), min(y0 + self.gcell, self.extent.ur.y)),
        )

    def gcell_center(self, cell: GridPoint) -> Point:
        return self.gcell_rect(cell).center

    def _arrays(self, kind: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        if kind == "h":
            return self.h_capacity, self.h_demand, self.h_history
        return self.v_capacity, self.v_demand, self.v_history

    def capacity(self, key: EdgeKey) -> int:
        return int(self._arrays(key[0])[0][key[1], key[2]])

    def demand(self, key: EdgeKey) -> int:
        return int(self._arrays(key[0])[1][key[1], key[2]])

    def history(self, key: EdgeKey) -> float:
        return float(self._arrays(key[0])[2][key[1], key[2]])

    def add_demand(self, key: EdgeKey, amount: int) -> None:
        self._arrays(key[0])[1][key[1], key[2]] += amount

    def overflowed(self) -> List[EdgeKey]:
        found: List[EdgeKey] = []
        for kind in ("h", "v"):
            capacity, demand, _ = self._arrays(kind)
            for i, j in zip(*np.nonzero(demand > capacity)):
                found.append((kind, int(i), int(j)))
        return found

    def total_overflow(self) -> int:
        return int(
            np.maximum(self.h_demand - self.h_capacity, 0).sum()
            + np.maximum(self.v_demand - self.v_capacity, 0).sum()
        )

    @property
    def total_capacity(self) -> int:
        return int(self.h_capacity.sum() + self.v_capacity.sum())


def _routing_layers(design: Design, cfg: RouterConfig) -> List[Layer]:
    tech = design.tech
    lo = tech.layer(cfg.min_layer).index if tech.has_layer(cfg.min_layer) else 1
    hi = tech.layer(cfg.max_layer).index if cfg.max_layer else len(tech.layers)
    layers = [layer for layer in tech.layers if lo <= layer.index <= hi]
    if not layers:
        raise ConfigError(f"no routing layers between {cfg.min_layer} and {cfg.max_layer}")
    if len({layer.is_horizontal for layer in layers}) < 2:
        raise ConfigError(
            f"layers {cfg.min_layer}..{cfg.max_layer} need both a horizontal and a vertical layer"
        )
    return layers


def _placed_rect(inst: Instance, rect: Rect) -> Rect:
    loc = inst.location
    if inst.orient == Orientation.FS:
        h = inst.master.height
        return Rect.of(
            loc.x + rect.ll.x, loc.y + h - rect.ll.y, loc.x + rect.ur.x, loc.y + h - rect.ur.y
        )
    return Rect.of(loc.x + rect.ll.x, loc.y + rect.ll.y, loc.x + rect.ur.x, loc.y + rect.ur.y)


def _obstacles(design: Design, layers: Sequence[Layer]) -> List[Tuple[str, Rect]]:
    """Power wires, macro obstructions and pins, and routing blockages, per layer name."""
    names = [layer.name for layer in layers]
    found: List[Tuple[str, Rect]] = []
    for snet in design.special_nets:
        for wire in snet.wires:
            found.append((wire.layer, wire.rect))
    for inst in design.instances:
        if inst.master.cls != CellClass.BLOCK or not inst.is_placed:
            continue
        shapes = list(inst.master.obstructions)
        for pin in inst.master.pins.values():
            shapes.extend(pin.shapes)
        for shape in shapes:
            found.append((shape.layer, _placed_rect(inst, shape.rect)))
    for blockage in design.blockages:
        if blockage.kind != BlockageKind.ROUTING:
            continue
        for name in [blockage.layer] if blockage.layer else names:
            found.append((name, blockage.rect))
    return [(name, rect) for name, rect in found if name in names]


def build_route_grid(
    design: Design, gcell_size: Optional[int] = None, cfg: RouterConfig = RouterConfig()
) -> RouteGrid:
    """Track capacity per GCell boundary and layer, minus power and macro obstructions."""
    tech = design.tech
    gcell = gcell_size or tech.gcell_size(cfg.gcell_tracks)
    extent = design.die
    nx = max(1, -(-extent.width // gcell))
    ny = max(1, -(-extent.height // gcell))
    layers = _routing_layers(design, cfg)
    xb = extent.ll.x + gcell * np.arange(1, nx, dtype=np.int64)
    yb = extent.ll.y + gcell * np.arange(1, ny, dtype=np.int64)
    masks: List[np.ndarray] = []
    tracks: List[np.ndarray] = []
    for layer in layers:
        if layer.is_horizontal:
            coords = np.array(layer.tracks(extent.ll.y, extent.ll.y, extent.ur.y), dtype=np.int64)
            masks.append(np.zeros((len(xb), len(coords)), dtype=bool))
        else:
            coords = np.array(layer.tracks(extent.ll.x, extent.ll.x, extent.ur.x), dtype=np.int64)
            masks.append(np.zeros((len(yb), len(coords)), dtype=bool))
        tracks.append(coords)
    by_name = {layer.name: k for k, layer in enumerate(layers)}
    for name, rect in _obstacles(design, layers):
        k = by_name[name]
        layer = layers[k]
        r = rect.expanded(layer.spacing + layer.width // 2)
        if layer.is_horizontal:
            boundary = (xb >= r.ll.x) & (xb <= r.ur.x)
            covered = (tracks[k] >= r.ll.y) & (tracks[k] <= r.ur.y)
        else:
            boundary = (yb >= r.ll.y) & (yb <= r.ur.y)
            covered = (tracks[k] >= r.ll.x) & (tracks[k] <= r.ur.x)
        masks[k][np.ix_(boundary, covered)] = True
    capacities: List[np.ndarray] = []
    for k, layer in enumerate(layers):
        origin = extent.ll.y if layer.is_horizontal else extent.ll.x
        count = ny if layer.is_horizontal else nx
        lines = np.minimum((tracks[k] - origin) // gcell, count - 1)
        free = ~masks[k]
        cap = np.zeros((free.shape[0], count), dtype=np.int64)
        for line in range(count):
            cap[:, line] = free[:, lines == line].sum(axis=1)
        capacities.append(cap if layer.is_horizontal else cap.T.copy())
    h_cap = np.zeros((nx - 1, ny), dtype=np.int64)
    v_cap = np.zeros((nx, ny - 1), dtype=np.int64)
    for layer, cap in zip(layers, capacities):
        if layer.is_horizontal:
            h_cap += cap
        else:
            v_cap += cap
    grid = RouteGrid(
        extent=extent,
        gcell=gcell,
        nx=nx,
        ny=ny,
        layers=layers,
        layer_capacity=capacities,
        layer_demand=[np.zeros_like(c) for c in capacities],
        tracks=tracks,
        h_capacity=h_cap,
        v_capacity=v_cap,
        h_demand=np.zeros_like(h_cap),
        v_demand=np.zeros_like(v_cap),
        h_history=np.zeros(h_cap.shape, dtype=float),
        v_history=np.zeros(v_cap.shape, dtype=float),
    )
    logger.debug("Route grid %sx%s gcell=%s capacity=%s", nx, ny, gcell, grid.total_capacity)
    return grid


# ---------------------------------------------------------------------------
# Topology
# ---------------------------------------------------------------------------


@dataclass
class RoutePin:
    pin: NetPin
    position: Point
    cell: GridPoint
    layer: int  # technology layer index of the pin shape


@dataclass
class RouteTopology:
    net: str
    net_id: int
    pins: List[RoutePin]
    tree: SteinerTree

    @property
    def terminals(self) -> List[GridPoint]:
        return self.tree.points[: self.tree.terminals]

    @property
    def length(self) -> int:
        return self.tree.length


def gen_topology(design: Design, net: Net, grid: RouteGrid) -> RouteTopology:
    """Steiner tree over the GCells of the net's placed pins."""
    pins = []
    for pin in net.pins:
        position = design.pin_position(pin)
        if position is None:
            continue
        pins.append(RoutePin(pin, position, grid.gcell_of(position), design.pin_layer(pin)))
    return RouteTopology(net.name, net.id, pins, rsmt(p.cell for p in pins))


# ---------------------------------------------------------------------------
# Planar routing
# ---------------------------------------------------------------------------


@dataclass
class PlanarRoute:
    net: str
    paths: List[List[GridPoint]] = field(default_factory=list)
    edges: Set[EdgeKey] = field(default_factory=set)


def _edge_key(p: GridPoint, q: GridPoint) -> EdgeKey:
    if p[1] == q[1]:
        return ("h", min(p[0], q[0]), p[1])
    return ("v", p[0], min(p[1], q[1]))


def _path_edges(path: Sequence[GridPoint]) -> List[EdgeKey]:
    return [_edge_key(a, b) for a, b in zip(path, path[1:])]


def _straight(p: GridPoint, q: GridPoint) -> List[GridPoint]:
    if p[1] == q[1]:
        step = 1 if q[0] >= p[0] else -1
        return [(x, p[1]) for x in range(p[0], q[0] + step, step)]
    step = 1 if q[1] >= p[1] else -1
    return [(p[0], y) for y in range(p[1], q[1] + step, step)]


def _polyline(points: Sequence[GridPoint]) -> List[GridPoint]:
    path = [points[0]]
    for a, b in zip(points, points[1:]):
        if a != b:
            path.extend(_straight(a, b)[1:])
    return path


def _patterns(a: GridPoint, b: GridPoint) -> List[List[GridPoint]]:
    """L shapes first, then every Z shape with its middle leg inside the bounding box."""
    (x1, y1), (x2, y2) = a, b
    shapes = [_polyline([a, (x2, y1), b]), _polyline([a, (x1, y2), b])]
    step = 1 if x2 >= x1 else -1
    for x in range(x1 + step, x2, step):
        shapes.append(_polyline([a, (x, y1), (x, y2), b]))
    step = 1 if y2 >= y1 else -1
    for y in range(y1 + step, y2, step):
        shapes.append(_polyline([a, (x1, y), (x2, y), b]))
    return shapes


class _PlanarRouter:
    def __init__(self, grid: RouteGrid, cfg: RouterConfig):
        self.grid = grid
        self.cfg = cfg
        self.penalty = cfg.overflow_penalty

    def cost(self, key: EdgeKey) -> float:
        grid = self.grid
        capacity = grid.capacity(key)
        over = max(0, grid.demand(key) + 1 - capacity)
        scale = _BLOCKED_COST if capacity <= 0 else 1.0
        return 1.0 + grid.history(key) + self.penalty * over * scale

    def free(self, key: EdgeKey) -> bool:
        return self.grid.demand(key) + 1 <= self.grid.capacity(key)

    def pattern(self, a: GridPoint, b: GridPoint) -> Optional[List[GridPoint]]:
        best = None
        for path in _patterns(a, b):
            keys = _path_edges(path)
            if not all(self.free(k) for k in keys):
                continue
            cost = sum(self.cost(k) for k in keys)
            if best is None or cost < best[0]:
                best = (cost, path)
        return best[1] if best else None

    def maze(self, a: GridPoint, b: GridPoint) -> List[GridPoint]:
        """Dijkstra inside the pins' bounding box grown by a margin; (cost, cell) orders ties."""
        grid = self.grid
        x0 = max(0, min(a[0], b[0]) - _MAZE_MARGIN)
        x1 = min(grid.nx - 1, max(a[0], b[0]) + _MAZE_MARGIN)
        y0 = max(0, min(a[1], b[1]) - _MAZE_MARGIN)
        y1 = min(grid.ny - 1, max(a[1], b[1]) + _MAZE_MARGIN)
        dist: Dict[GridPoint, float] = {a: 0.0}
        prev: Dict[GridPoint, GridPoint] = {}
        heap = [(0.0, a)]
        while heap:
            d, u = heapq.heappop(heap)
            if u == b:
                break
            if d > dist[u]:
                continue
            for v in ((u[0] + 1, u[1]), (u[0] - 1, u[1]), (u[0], u[1] + 1), (u[0], u[1] - 1)):
                if not (x0 <= v[0] <= x1 and y0 <= v[1] <= y1):
                    continue
                nd = d + self.cost(_edge_key(u, v))
                if nd < dist.get(v, float("inf")):
                    dist[v] = nd
                    prev[v] = u
                    heapq.heappush(heap, (nd, v))
        path = [b]
        while path[-1] != a:
            path.append(prev[path[-1]])
        path.reverse()
        return path

    def route(self, topology: RouteTopology, maze_only: bool = False) -> PlanarRoute:
        result = PlanarRoute(topology.net)
        for a, b in topology.tree.segments():
            path = None if maze_only else self.pattern(a, b)
            if path is None:
                path = self.maze(a, b)
            result.paths.append(path)
            result.edges.update(_path_edges(path))
        self.commit(result, 1)
        return result

    def commit(self, route: PlanarRoute, sign: int) -> None:
        for key in route.edges:
            self.grid.add_demand(key, sign)


def _net_order(topologies: Iterable[RouteTopology]) -> List[RouteTopology]:
    def hpwl(t: RouteTopology) -> int:
        cells = t.terminals
        if not cells:
            return 0
        xs, ys = [c[0] for c in cells], [c[1] for c in cells]
        return max(xs) - min(xs) + max(ys) - min(ys)

    return sorted(topologies, key=lambda t: (-hpwl(t), t.net_id))


def planar_route(
    grid: RouteGrid, topologies: Sequence[RouteTopology], cfg: RouterConfig = RouterConfig()
) -> Tuple[Dict[str, PlanarRoute], int]:
    """Pattern routing then negotiated rip-up and reroute; returns routes and rounds used."""
    router = _PlanarRouter(grid, cfg)
    order = _net_order(topologies)
    routes = {t.net: router.route(t) for t in order}
    rounds = 0
    while rounds < cfg.max_rounds:
        over = set(grid.overflowed())
        if not over:
            break
        rounds += 1
        for kind, i, j in over:
            grid._arrays(kind)[2][i, j] += cfg.history_increment
        router.penalty *= cfg.penalty_growth
        victims = [t for t in order if routes[t.net].edges & over]
        logger.debug("Negotiation round %s overflow=%s reroute=%s", rounds, len(over), len(victims))
        for topology in victims:
            router.commit(routes[topology.net], -1)
            routes[topology.net] = router.route(topology, maze_only=True)
    overflow = grid.total_overflow()
    if overflow:
        raise Unroutable(
            f"{overflow} overflowed track(s) remain after {cfg.max_rounds} rounds",
            hotspots=congestion_map(grid),
            overflow=overflow,
        )
    return routes, rounds


# ---------------------------------------------------------------------------
# Layer assignment
# ---------------------------------------------------------------------------


@dataclass
class Segment:
    direction: str  # "h" or "v"
    line: int  # GCell row for "h", column for "v"
    lo: int
    hi: int
    layer: int = -1  # index into RouteGrid.layers
    track: Optional[int] = None  # DBU coordinate after track assignment

    def cells(self) -> List[GridPoint]:
        if self.direction == "h":
            return [(x, self.line) for x in range(self.lo, self.hi + 1)]
        return [(self.line, y) for y in range(self.lo, self.hi + 1)]

    def contains(self, cell: GridPoint) -> bool:
        along, across = (cell[0], cell[1]) if self.direction == "h" else (cell[1], cell[0])
        return across == self.line and self.lo <= along <= self.hi

    def edges(self) -> List[EdgeKey]:
        if self.direction == "h":
            return [("h", x, self.line) for x in range(self.lo, self.hi)]
        return [("v", self.line, y) for y in range(self.lo, self.hi)]

    def touches(self, other: "Segment") -> bool:
        return any(other.contains(c) for c in self.cells())


@dataclass
class NetRoute:
    net: str
    segments: List[Segment] = field(default_factory=list)
    pins: List[RoutePin] = field(default_factory=list)
    vias: int = 0
    overflow: int = 0


def segments_of(edges: Iterable[EdgeKey]) -> List[Segment]:
    """Maximal straight runs of planar edges, horizontal runs first."""
    runs: Dict[Tuple[str, int], List[int]] = {}
    for kind, i, j in edges:
        line, along = (j, i) if kind == "h" else (i, j)
        runs.setdefault((kind, line), []).append(along)
    segments: List[Segment] = []
    for (kind, line), values in sorted(runs.items()):
        values.sort()
        start = prev = values[0]
        for v in values[1:] + [None]:
            if v is not None and v == prev + 1:
                prev = v
                continue
            segments.append(Segment(kind, line, start, prev + 1))
            if v is not None:
                start = prev = v
    return segments


def _layer_cost(grid: RouteGrid, k: int, segment: Segment) -> Tuple[float, int]:
    capacity, demand = grid.layer_capacity[k], grid.layer_demand[k]
    cost, over = 0.0, 0
    for _, i, j in segment.edges():
        cap = int(capacity[i, j])
        used = int(demand[i, j]) + 1
        if used > cap:
            cost += _LAYER_OVERFLOW_COST
            over += 1
        else:
            cost += _CONGESTION_WEIGHT * used / cap
    return cost, over


def _assign_net(
    grid: RouteGrid, route: PlanarRoute, topology: RouteTopology, via_cost: float
) -> NetRoute:
    segments = segments_of(route.edges)
    result = NetRoute(route.net, segments, list(topology.pins))
    if not segments:
        return result
    choices = {
        "h": [k for k, layer in enumerate(grid.layers) if layer.is_horizontal],
        "v": [k for k, layer in enumerate(grid.layers) if not layer.is_horizontal],
    }
    tech_index = [layer.index for layer in grid.layers]
    pins_of: Dict[int, List[RoutePin]] = {}
    for pin in topology.pins:
        for s, segment in enumerate(segments):
            if segment.contains(pin.cell):
                pins_of.setdefault(s, []).append(pin)
                break
    root = next(iter(pins_of), 0)
    children: Dict[int, List[int]] = {s: [] for s in range(len(segments))}
    seen, order, queue = {root}, [], deque([root])
    while queue:
        s = queue.popleft()
        order.append(s)
        for t in range(len(segments)):
            if t not in seen and segments[s].touches(segments[t]):
                seen.add(t)
                children[s].append(t)
                queue.append(t)
    for s in range(len(segments)):
        if s not in seen:
            order.append(s)
    # cost[s][k]: best cost of the subtree rooted at s with s on layer k
    cost: Dict[int, Dict[int, float]] = {}
    pick: Dict[Tuple[int, int, int], int] = {}
    for s in reversed(order):
        segment = segments[s]
        cost[s] = {}
        for k in choices[segment.direction]:
            total = _layer_cost(grid, k, segment)[0]
            for pin in pins_of.get(s, ()):
                total += via_cost * abs(tech_index[k] - pin.layer)
            for c in children[s]:
                options = {
                    kc: cost[c][kc] + via_cost * abs(tech_index[k] - tech_index[kc])
                    for kc in cost[c]
                }
                best_k = min(options, key=lambda kc: (options[kc], kc))
                pick[(s, k, c)] = best_k
                total += options[best_k]
            cost[s][k] = total
    roots = [s for s in order if s == root or s not in seen]
    for r in roots:
        segments[r].layer = min(cost[r], key=lambda k: (cost[r][k], k))
    for s in order:
        for c in children[s]:
            segments[c].layer = pick[(s, segments[s].layer, c)]
    vias = 0
    for s in order:
        for c in children[s]:
            vias += abs(tech_index[segments[s].layer] - tech_index[segments[c].layer])
        for pin in pins_of.get(s, ()):
            vias += abs(tech_index[segments[s].layer] - pin.layer)
    result.vias = vias
    for segment in segments:
        over = _layer_cost(grid, segment.layer, segment)[1]
        result.overflow += over
        demand = grid.layer_demand[segment.layer]
        for _, i, j in segment.edges():
            demand[i, j] += 1
    return result


def layer_assign(
    grid: RouteGrid,
    planar: Dict[str, PlanarRoute],
    topologies: Sequence[RouteTopology],
    cfg: RouterConfig = RouterConfig(),
) -> Dict[str, NetRoute]:
    """Tree DP per net over its straight segments: vias plus layer congestion."""
    routes: Dict[str, NetRoute] = {}
    for topology in _net_order(topologies):
        routes[topology.net] = _assign_net(grid, planar[topology.net], topology, cfg.via_cost)
    spilled = sum(r.overflow for r in routes.values())
    if spilled:
        logger.warning("Layer assignment spilled %s edge(s) over layer capacity", spilled)
    return routes


# ---------------------------------------------------------------------------
# Guides
# ---------------------------------------------------------------------------

GuideSet = Dict[str, List[Tuple[str, Rect]]]


def junction_cells(route: NetRoute) -> Set[GridPoint]:
    """Segment ends, pin GCells and GCells shared by two or more segments."""
    seen: Set[GridPoint] = set()
    cells: Set[GridPoint] = {p.cell for p in route.pins}
    for segment in route.segments:
        run = segment.cells()
        cells.update((run[0], run[-1]))
        cells.update(c for c in run if c in seen)
        seen.update(run)
    return cells


def _junction_layers(route: NetRoute, cell: GridPoint) -> List[int]:
    return sorted({s.layer for s in route.segments if s.contains(cell)})


def emit_guides(grid: RouteGrid, routes: Dict[str, NetRoute]) -> GuideSet:
    """One rectangle per segment, plus per-layer GCell guides where layers change and at pins."""
    guides: GuideSet = {}
    tech_layers = {layer.index: layer.name for layer in grid.layers}
    for name in sorted(routes):
        route = routes[name]
        found: Set[Tuple[str, Rect]] = set()
        for segment in route.segments:
            cells = segment.cells()
            lo, hi = grid.gcell_rect(cells[0]), grid.gcell_rect(cells[-1])
            found.add((grid.layers[segment.layer].name, Rect(lo.ll, hi.ur)))
        for cell in sorted(junction_cells(route)):
            ks = _junction_layers(route, cell)
            indices = [grid.layers[k].index for k in ks] or [grid.layers[0].index]
            if any(p.cell == cell for p in route.pins):
                indices.append(grid.layers[0].index)
            for index in range(min(indices), max(indices) + 1):
                if index in tech_layers:
                    found.add((tech_layers[index], grid.gcell_rect(cell)))
        guides[name] = sorted(found, key=lambda g: (g[0], g[1].ll, g[1].ur))
    return guides


def write_guides(guides: GuideSet) -> str:
    """Guide file text: net name, ``(``, ``x1 y1 x2 y2 layer`` lines, ``)``."""
    lines: List[str] = []
    for name in sorted(guides):
        lines.append(name)
        lines.append("(")
        for layer, rect in guides[name]:
            lines.append(f"{rect.ll.x} {rect.ll.y} {rect.ur.x} {rect.ur.y} {layer}")
        lines.append(")")
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Track assignment and final wires
# ---------------------------------------------------------------------------


@dataclass
class TrackAssignment:
    overflow: int = 0
    panels: int = 0


def track_assign(grid: RouteGrid, routes: Dict[str, NetRoute]) -> TrackAssignment:
    """Greedy interval scheduling per panel (layer and GCell row/column)."""
    panels: Dict[Tuple[int, int], List[Tuple[int, int, str, int, Segment]]] = {}
    for name in sorted(routes):
        for s, segment in enumerate(routes[name].segments):
            key = (segment.layer, segment.line)
            panels.setdefault(key, []).append(
                (segment.lo, -(segment.hi - segment.lo), name, s, segment)
            )
    result = TrackAssignment(panels=len(panels))
    for (k, line), items in sorted(panels.items()):
        layer = grid.layers[k]
        origin = grid.extent.ll.y if layer.is_horizontal else grid.extent.ll.x
        count = grid.ny if layer.is_horizontal else grid.nx
        coords = [
            int(c) for c in grid.tracks[k] if min((c - origin) // grid.gcell, count - 1) == line
        ]
        if not coords:
            cell = (0, line) if layer.is_horizontal else (line, 0)
            centre = grid.gcell_center(cell)
            coords = [centre.y if layer.is_horizontal else centre.x]
        last = [-1] * len(coords)
        for lo, _, _, _, segment in sorted(items, key=lambda item: item[:4]):
            free = [t for t in range(len(coords)) if last[t] < lo]
            if free:
                t = free[0]
            else:
                t = min(range(len(coords)), key=lambda u: (last[u], u))
                result.overflow += 1
            last[t] = max(last[t], segment.hi)
            segment.track = coords[t]
    if result.overflow:
        logger.warning("Track assignment left %s overlapping segment(s)", result.overflow)
    return result


def _junction_point(grid: RouteGrid, route: NetRoute, cell: GridPoint) -> Point:
    vertical = [s for s in route.segments if s.direction == "v" and s.contains(cell)]
    horizontal = [s for s in route.segments if s.direction == "h" and s.contains(cell)]
    pins = sorted((p for p in route.pins if p.cell == cell), key=lambda p: (p.position, p.pin))
    centre = grid.gcell_center(cell)
    if vertical:
        x = min(vertical, key=lambda s: (s.layer, s.track)).track
    else:
        x = pins[0].position.x if pins else centre.x
    if horizontal:
        y = min(horizontal, key=lambda s: (s.layer, s.track)).track
    else:
        y = pins[0].position.y if pins else centre.y
    return Point(x, y)


def _via(design: Design, lo: int, hi: int, at: Point) -> Optional[Via]:
    if lo == hi:
        return None
    return Via(design.tech.via_name(lo, hi), at)


def write_routes(design: Design, grid: RouteGrid, routes: Dict[str, NetRoute]) -> None:
    """Replace every routed net's wires and vias with track-snapped geometry."""
    base = grid.layers[0]
    for name, route in routes.items():
        net = design.net(name)
        wires: List[Wire] = []
        vias: List[Via] = []

        def wire(layer: str, a: Point, b: Point) -> None:
            if a != b:
                wires.append(Wire(layer, a, b))

        cells = junction_cells(route)
        if not route.segments:
            first = min(route.pins, key=lambda p: (p.position, p.pin))
            junctions = {c: first.position for c in cells}
        else:
            junctions = {c: _junction_point(grid, route, c) for c in cells}
        for segment in route.segments:
            layer = grid.layers[segment.layer].name
            first, last = segment.cells()[0], segment.cells()[-1]
            t = segment.track
            if segment.direction == "h":
                wire(layer, Point(junctions[first].x, t), Point(junctions[last].x, t))
            else:
                wire(layer, Point(t, junctions[first].y), Point(t, junctions[last].y))
        for cell in sorted(cells):
            j = junctions[cell]
            touching = [s for s in route.segments if s.contains(cell)]
            for segment in touching:
                layer = grid.layers[segment.layer].name
                if segment.direction == "h":
                    wire(layer, Point(j.x, segment.track), j)
                else:
                    wire(layer, Point(segment.track, j.y), j)
            indices = [grid.layers[s.layer].index for s in touching]
            low = min(indices) if indices else base.index
            low_name = design.tech.layer_by_index(low).name
            if indices:
                via = _via(design, low, max(indices), j)
                if via is not None:
                    vias.append(via)
            for pin in sorted((p for p in route.pins if p.cell == cell), key=lambda p: p.pin):
                p = pin.position
                via = _via(design, min(pin.layer, low), max(pin.layer, low), p)
                if via is not None:
                    vias.append(via)
                wire(low_name, p, Point(j.x, p.y))
                wire(low_name, Point(j.x, p.y), j)
        net.wires = wires
        net.vias = vias


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


@dataclass
class RouteResult:
    grid: RouteGrid
    topologies: Dict[str, RouteTopology]
    planar: Dict[str, PlanarRoute]
    routes: Dict[str, NetRoute]
    guides: GuideSet
    tracks: TrackAssignment
    rounds: int = 0
    layer_overflow: int = 0
    wirelength: int = 0
    via_count: int = 0

    @property
    def topology_length(self) -> int:
        """Σ Steiner lengths in DBU (GCell units times GCell size)."""
        return sum(t.length for t in self.topologies.values()) * self.grid.gcell


def _reserve_wires(grid: RouteGrid, nets: Iterable[Net]) -> int:
    """Charge existing wires against planar and per-layer demand; returns the edges charged."""
    by_name = {layer.name: k for k, layer in enumerate(grid.layers)}
    charged = 0
    for net in nets:
        for wire in net.wires:
            k = by_name.get(wire.layer)
            if k is None:
                continue
            a, b = grid.gcell_of(wire.start), grid.gcell_of(wire.end)
            if grid.layers[k].is_horizontal and a[1] == b[1]:
                keys = [("h", i, a[1]) for i in range(min(a[0], b[0]), max(a[0], b[0]))]
            elif not grid.layers[k].is_horizontal and a[0] == b[0]:
                keys = [("v", a[0], j) for j in range(min(a[1], b[1]), max(a[1], b[1]))]
            else:
                continue
            for key in keys:
                grid.add_demand(key, 1)
                grid.layer_demand[k][key[1], key[2]] += 1
            charged += len(keys)
    return charged


def global_route(design: Design, cfg: RouterConfig = RouterConfig()) -> RouteResult:
    """Route every net with at least two placed pins and write the wires.

    Clock nets that already carry wires (from CTS) keep them; their wires are charged
    against the grid before anything else is routed.
    """
    for inst in design.instances:
        if not inst.is_placed:
            raise PreconditionViolated("all instances placed", "route")
    grid = build_route_grid(design, cfg=cfg)
    prewired = [net for net in design.nets if net.is_clock and net.wires]
    if prewired:
        charged = _reserve_wires(grid, prewired)
        logger.info("Kept wires of %s clock nets, %s GCell edges charged", len(prewired), charged)
    kept = {net.name for net in prewired}
    topologies = {}
    for net in design.nets:
        if net.name in kept:
            continue
        topology = gen_topology(design, net, grid)
        if len(topology.pins) >= 2:
            topologies[net.name] = topology
    ordered = [topologies[name] for name in sorted(topologies)]
    planar, rounds = planar_route(grid, ordered, cfg)
    routes = layer_assign(grid, planar, ordered, cfg)
    guides = emit_guides(grid, routes)
    tracks = track_assign(grid, routes)
    write_routes(design, grid, routes)
    result = RouteResult(
        grid=grid,
        topologies=topologies,
        planar=planar,
        routes=routes,
        guides=guides,
        tracks=tracks,
        rounds=rounds,
        layer_overflow=sum(r.overflow for r in routes.values()),
        wirelength=sum(design.net(name).wirelength() for name in routes),
        via_count=sum(len(design.net(name).vias) for name in routes),
    )
    logger.info(
        "Routed nets=%s rounds=%s wirelength=%s vias=%s layer_overflow=%s track_overflow=%s",
        len(routes),
        rounds,
        result.wirelength,
        result.via_count,
        result.layer_overflow,
        tracks.overflow,
    )
    return result
