"""Quadratic global placement.

Bound2Bound net model solved with conjugate gradient, alternated with bin-based
spreading. Coordinates are cell centres, scaled to row heights relative to the
core origin while solving.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import cg

from .db import BlockageKind, Design, Instance, PlacementStatus, Point
from .errors import NoMovableCells, PreconditionViolated
from .models import PlacerConfig

logger = logging.getLogger(__name__)

# Weight of the pull towards the previous solution; keeps disconnected cells finite.
_ANCHOR_EPS = 1e-6
_WIRELENGTH_ROUNDS = 5


@dataclass
class _Terminal:
    var: int  # movable index, -1 for fixed terminals
    ox: float
    oy: float


class _NetModel:
    """Terminals of every net that touches at least one movable cell."""

    def __init__(self, design: Design, movable: List[Instance], scale: float):
        origin = design.core.ll
        index = {inst.id: k for k, inst in enumerate(movable)}
        self.nets: List[List[_Terminal]] = []
        for net in design.nets:
            if net.is_clock:
                continue
            terms: List[_Terminal] = []
            for pin in net.pins:
                if pin.instance is None:
                    loc = design.port(pin.pin).location
                    if loc is not None:
                        terms.append(
                            _Terminal(-1, (loc.x - origin.x) / scale, (loc.y - origin.y) / scale)
                        )
                    continue
                inst = design.instances[pin.instance]
                if pin.instance in index:
                    ox, oy = inst.master.pin_offset(pin.pin)
                    terms.append(
                        _Terminal(
                            index[pin.instance],
                            (ox - inst.width / 2) / scale,
                            (oy - inst.height / 2) / scale,
                        )
                    )
                elif inst.is_placed:
                    p = inst.pin_position(pin.pin)
                    terms.append(_Terminal(-1, (p.x - origin.x) / scale, (p.y - origin.y) / scale))
            if len(terms) >= 2 and any(t.var >= 0 for t in terms):
                self.nets.append(terms)


def _solve_axis(
    model: _NetModel,
    axis: int,
    pos: np.ndarray,
    anchors: Optional[np.ndarray],
    anchor_weight: float,
    uniform: bool,
    min_dist: float,
    cfg: PlacerConfig,
) -> np.ndarray:
    n = len(pos)
    diag = np.full(n, _ANCHOR_EPS)
    rhs = _ANCHOR_EPS * pos
    rows: List[int] = []
    cols: List[int] = []
    vals: List[float] = []

    def offset(t: _Terminal) -> float:
        return t.ox if axis == 0 else t.oy

    def connect(a: _Terminal, b: _Terminal, w: float) -> None:
        oa, ob = offset(a), offset(b)
        if a.var >= 0 and b.var >= 0:
            if a.var == b.var:
                return
            diag[a.var] += w
            diag[b.var] += w
            rows.extend((a.var, b.var))
            cols.extend((b.var, a.var))
            vals.extend((-w, -w))
            rhs[a.var] += w * (ob - oa)
            rhs[b.var] += w * (oa - ob)
        elif a.var >= 0:
            diag[a.var] += w
            rhs[a.var] += w * (ob - oa)
        elif b.var >= 0:
            diag[b.var] += w
            rhs[b.var] += w * (oa - ob)

    for terms in model.nets:
        coords = [pos[t.var] + offset(t) if t.var >= 0 else offset(t) for t in terms]
        p = len(terms)
        lo = min(range(p), key=lambda k: (coords[k], k))
        hi = max(range(p), key=lambda k: (coords[k], -k))
        if lo == hi:
            hi = (lo + 1) % p

        def weight(i: int, j: int) -> float:
            if uniform:
                return 2.0 / (p - 1)
            return 2.0 / ((p - 1) * max(abs(coords[i] - coords[j]), min_dist))

        connect(terms[lo], terms[hi], weight(lo, hi))
        for k in range(p):
            if k in (lo, hi):
                continue
            connect(terms[k], terms[lo], weight(k, lo))
            connect(terms[k], terms[hi], weight(k, hi))

    if anchors is not None and anchor_weight > 0:
        diag += anchor_weight
        rhs += anchor_weight * anchors
    idx = np.arange(n)
    matrix = coo_matrix(
        (np.concatenate([np.asarray(vals, dtype=float), diag]),
         (np.concatenate([np.asarray(rows, dtype=int), idx]),
          np.concatenate([np.asarray(cols, dtype=int), idx]))),
        shape=(n, n),
    ).tocsr()
    solution, info = cg(matrix, rhs, x0=pos, rtol=cfg.cg_tolerance, maxiter=cfg.max_iterations)
    if info > 0:
        logger.debug("CG stopped at iteration cap axis=%s", axis)
    return solution


class _Bins:
    """Density bins over the core in scaled coordinates."""

    def __init__(self, design: Design, scale: float, cfg: PlacerConfig):
        core = design.core
        self.size = cfg.bin_rows * design.row_height() / scale
        width, height = core.width / scale, core.height / scale
        self.nx = max(1, int(np.ceil(width / self.size - 1e-9)))
        self.ny = max(1, int(np.ceil(height / self.size - 1e-9)))
        self.width, self.height = width, height
        xs = np.minimum(np.arange(self.nx + 1) * self.size, width)
        ys = np.minimum(np.arange(self.ny + 1) * self.size, height)
        self.x_edges, self.y_edges = xs, ys
        free = np.outer(np.diff(xs), np.diff(ys))
        blocked = [
            inst.bbox for inst in design.instances if inst.is_placed and not inst.is_movable
        ] + [b.rect for b in design.blockages if b.kind == BlockageKind.PLACEMENT]
        for rect in blocked:
            x1, x2 = (rect.ll.x - core.ll.x) / scale, (rect.ur.x - core.ll.x) / scale
            y1, y2 = (rect.ll.y - core.ll.y) / scale, (rect.ur.y - core.ll.y) / scale
            ox = np.clip(np.minimum(xs[1:], x2) - np.maximum(xs[:-1], x1), 0, None)
            oy = np.clip(np.minimum(ys[1:], y2) - np.maximum(ys[:-1], y1), 0, None)
            free -= np.outer(ox, oy)
        self.free = np.clip(free, 0.0, None)

    def bin_of(self, x: float, y: float) -> Tuple[int, int]:
        ix = min(self.nx - 1, max(0, int(x // self.size)))
        iy = min(self.ny - 1, max(0, int(y // self.size)))
        return ix, iy

    def usage(self, xs: np.ndarray, ys: np.ndarray, areas: np.ndarray) -> np.ndarray:
        usage = np.zeros((self.nx, self.ny))
        for x, y, a in zip(xs, ys, areas):
            usage[self.bin_of(x, y)] += a
        return usage

    def max_density(self, usage: np.ndarray) -> float:
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(self.free > 0, usage / np.where(self.free > 0, self.free, 1), np.inf)
        ratio = np.where(usage > 0, ratio, 0.0)
        return float(ratio.max()) if ratio.size else 0.0


def _spread(
    bins: _Bins, xs: np.ndarray, ys: np.ndarray, areas: np.ndarray, target: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Shed cells of over-full bins to the nearest bin with room along a BFS frontier."""
    xs, ys = xs.copy(), ys.copy()
    capacity = bins.free * target
    usage = bins.usage(xs, ys, areas)
    members: dict = {}
    for k, (x, y) in enumerate(zip(xs, ys)):
        members.setdefault(bins.bin_of(x, y), []).append(k)
    overflow = usage - capacity
    order = sorted(
        ((ix, iy) for ix in range(bins.nx) for iy in range(bins.ny) if overflow[ix, iy] > 1e-9),
        key=lambda b: (-overflow[b], b),
    )
    for origin in order:
        cx = (bins.x_edges[origin[0]] + bins.x_edges[origin[0] + 1]) / 2
        cy = (bins.y_edges[origin[1]] + bins.y_edges[origin[1] + 1]) / 2
        cells = sorted(
            members.get(origin, []), key=lambda k: (-(abs(xs[k] - cx) + abs(ys[k] - cy)), k)
        )
        for k in cells:
            if usage[origin] <= capacity[origin] + 1e-9:
                break
            dest = _nearest_room(bins, origin, usage, capacity, areas[k])
            if dest is None:
                break
            x0, x1 = bins.x_edges[dest[0]], bins.x_edges[dest[0] + 1]
            y0, y1 = bins.y_edges[dest[1]], bins.y_edges[dest[1] + 1]
            pad_x, pad_y = min(1e-3, (x1 - x0) / 4), min(1e-3, (y1 - y0) / 4)
            xs[k] = min(max(xs[k], x0 + pad_x), x1 - pad_x)
            ys[k] = min(max(ys[k], y0 + pad_y), y1 - pad_y)
            usage[origin] -= areas[k]
            usage[dest] += areas[k]
    return xs, ys


def _nearest_room(
    bins: _Bins, start: Tuple[int, int], usage: np.ndarray, capacity: np.ndarray, area: float
) -> Optional[Tuple[int, int]]:
    seen = {start}
    queue = deque([start])
    while queue:
        ix, iy = queue.popleft()
        for nx_, ny_ in ((ix + 1, iy), (ix - 1, iy), (ix, iy + 1), (ix, iy - 1)):
            if not (0 <= nx_ < bins.nx and 0 <= ny_ < bins.ny) or (nx_, ny_) in seen:
                continue
            seen.add((nx_, ny_))
            if usage[nx_, ny_] + area <= capacity[nx_, ny_] + 1e-9:
                return nx_, ny_
            queue.append((nx_, ny_))
    return None


def _movable(design: Design) -> List[Instance]:
    if not design.rows:
        raise PreconditionViolated("floorplan initialized", "place")
    movable = [inst for inst in design.instances if inst.is_movable]
    if not movable:
        raise NoMovableCells("design has no movable standard cells")
    return movable


def _commit(
    design: Design, movable: List[Instance], xs: np.ndarray, ys: np.ndarray, scale: float
) -> None:
    core = design.core
    for inst, x, y in zip(movable, xs, ys):
        lx = int(round(core.ll.x + x * scale - inst.width / 2))
        ly = int(round(core.ll.y + y * scale - inst.height / 2))
        lx = min(max(lx, core.ll.x), core.ur.x - inst.width)
        ly = min(max(ly, core.ll.y), core.ur.y - inst.height)
        inst.location = Point(lx, ly)
        inst.status = PlacementStatus.PLACED


def global_place(design: Design, cfg: PlacerConfig = PlacerConfig()) -> Design:
    """Minimize quadratic Bound2Bound wirelength under a bin density target.

    Placed movables start where they are; unplaced ones start at uniform random points
    of the core drawn from ``cfg.seed``.
    """
    movable = _movable(design)
    scale = float(design.row_height())
    core = design.core
    model = _NetModel(design, movable, scale)
    rng = np.random.default_rng(cfg.seed)
    xs = np.empty(len(movable))
    ys = np.empty(len(movable))
    for k, inst in enumerate(movable):
        if inst.is_placed:
            xs[k] = (inst.location.x - core.ll.x + inst.width / 2) / scale
            ys[k] = (inst.location.y - core.ll.y + inst.height / 2) / scale
        else:
            xs[k] = rng.uniform(0.0, core.width / scale)
            ys[k] = rng.uniform(0.0, core.height / scale)
    areas = np.array([inst.width * inst.height for inst in movable], dtype=float) / scale**2
    min_dist = design.site_width() / scale

    for rnd in range(_WIRELENGTH_ROUNDS):
        uniform = rnd == 0
        xs = _solve_axis(model, 0, xs, None, 0.0, uniform, min_dist, cfg)
        ys = _solve_axis(model, 1, ys, None, 0.0, uniform, min_dist, cfg)
    xs = np.clip(xs, 0, core.width / scale)
    ys = np.clip(ys, 0, core.height / scale)

    bins = _Bins(design, scale, cfg)
    density = bins.max_density(bins.usage(xs, ys, areas))
    iterations = 0
    for iterations in range(1, cfg.spread_iterations + 1):
        if density <= cfg.target_density:
            break
        sx, sy = _spread(bins, xs, ys, areas, cfg.target_density)
        weight = 0.02 * iterations
        xs = np.clip(
            _solve_axis(model, 0, xs, sx, weight, False, min_dist, cfg), 0, core.width / scale
        )
        ys = np.clip(
            _solve_axis(model, 1, ys, sy, weight, False, min_dist, cfg), 0, core.height / scale
        )
        density = bins.max_density(bins.usage(xs, ys, areas))
        logger.debug("Spreading iteration=%s density=%.3f", iterations, density)
    if density > cfg.target_density:
        xs, ys = _spread(bins, xs, ys, areas, cfg.target_density)
        density = bins.max_density(bins.usage(xs, ys, areas))
    _commit(design, movable, xs, ys, scale)
    logger.info(
        "Global placement cells=%s nets=%s spread_iterations=%s max_density=%.3f",
        len(movable),
        len(model.nets),
        iterations,
        density,
    )
    return design


def random_place(design: Design, seed: int = 42) -> Design:
    """Uniformly random baseline placement of movable cells inside the core."""
    movable = _movable(design)
    rng = np.random.default_rng(seed)
    core = design.core
    for inst in movable:
        x = int(rng.integers(core.ll.x, max(core.ll.x, core.ur.x - inst.width) + 1))
        y = int(rng.integers(core.ll.y, max(core.ll.y, core.ur.y - inst.height) + 1))
        inst.location = Point(x, y)
        inst.status = PlacementStatus.PLACED
    logger.info("Random placement cells=%s seed=%s", len(movable), seed)
    return design
