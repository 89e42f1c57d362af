"""Read-only evaluators: wirelength, placement density and routing congestion."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, Iterable, Optional

import numpy as np

from .db import Design, Net, PinUse, Point, Rect

if TYPE_CHECKING:
    from .route import RouteGrid

logger = logging.getLogger(__name__)


@dataclass
class BinGrid:
    """Scalar grid over ``extent``; bin (ix, iy) starts at ``extent.ll + (ix, iy) * bin_size``."""

    extent: Rect
    bin_size: int
    values: np.ndarray

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    def edges(self, axis: int) -> np.ndarray:
        lo = self.extent.ll.x if axis == 0 else self.extent.ll.y
        hi = self.extent.ur.x if axis == 0 else self.extent.ur.y
        n = self.values.shape[axis]
        return np.minimum(lo + np.arange(n + 1, dtype=np.int64) * self.bin_size, hi)

    def bin_areas(self) -> np.ndarray:
        return np.outer(np.diff(self.edges(0)), np.diff(self.edges(1))).astype(float)

    def bin_rect(self, ix: int, iy: int) -> Rect:
        xs, ys = self.edges(0), self.edges(1)
        return Rect(Point(int(xs[ix]), int(ys[iy])), Point(int(xs[ix + 1]), int(ys[iy + 1])))

    def bin_of(self, p: Point) -> tuple:
        ix = min(max((p.x - self.extent.ll.x) // self.bin_size, 0), self.nx - 1)
        iy = min(max((p.y - self.extent.ll.y) // self.bin_size, 0), self.ny - 1)
        return int(ix), int(iy)

    @property
    def max(self) -> float:
        return float(self.values.max()) if self.values.size else 0.0

    def to_dict(self) -> Dict[str, object]:
        return {
            "bin_size": self.bin_size,
            "nx": self.nx,
            "ny": self.ny,
            "max": self.max,
            "values": np.round(self.values, 9).tolist(),
        }

    @classmethod
    def empty(cls, extent: Rect, bin_size: int) -> "BinGrid":
        nx = max(1, -(-extent.width // bin_size))
        ny = max(1, -(-extent.height // bin_size))
        return cls(extent, bin_size, np.zeros((nx, ny)))


def hpwl_of(points: Iterable[Point]) -> int:
    pts = list(points)
    if len(pts) < 2:
        return 0
    xs = [p.x for p in pts]
    ys = [p.y for p in pts]
    return (max(xs) - min(xs)) + (max(ys) - min(ys))


def net_hpwl(design: Design, net: Net) -> int:
    """Half-perimeter of the bounding box of the net's placed pin centres."""
    points = [p for p in (design.pin_position(pin) for pin in net.pins) if p is not None]
    return hpwl_of(points)


def total_hpwl(design: Design) -> int:
    """Sum of net HPWL over signal nets; clock and supply nets are left out."""
    unplaced = 0
    total = 0
    for net in design.nets:
        if net.use != PinUse.SIGNAL:
            continue
        points = []
        for pin in net.pins:
            pos = design.pin_position(pin)
            if pos is None:
                unplaced += 1
            else:
                points.append(pos)
        total += hpwl_of(points)
    if unplaced:
        logger.warning("HPWL excluded %s unplaced pins", unplaced)
    return total


def density_map(design: Design, bin_size: Optional[int] = None) -> BinGrid:
    """Fraction of each core bin covered by placed instances (fixed macros included)."""
    size = bin_size or 4 * design.row_height()
    grid = BinGrid.empty(design.core, size)
    xs, ys = grid.edges(0), grid.edges(1)
    covered = np.zeros_like(grid.values)
    for inst in design.instances:
        if not inst.is_placed:
            continue
        box = inst.bbox
        ox = np.clip(np.minimum(xs[1:], box.ur.x) - np.maximum(xs[:-1], box.ll.x), 0, None)
        oy = np.clip(np.minimum(ys[1:], box.ur.y) - np.maximum(ys[:-1], box.ll.y), 0, None)
        if ox.any() and oy.any():
            covered += np.outer(ox, oy)
    areas = grid.bin_areas()
    grid.values = np.divide(covered, areas, out=np.zeros_like(covered), where=areas > 0)
    return grid


def _ratio(demand: np.ndarray, capacity: np.ndarray) -> np.ndarray:
    # zero-capacity edges with demand report demand + 1 so they always read as overflowed
    safe = np.where(capacity > 0, capacity, 1)
    ratio = demand / safe
    return np.where((capacity <= 0) & (demand > 0), demand + 1.0, ratio)


def congestion_map(grid: "RouteGrid", per_layer: bool = False) -> BinGrid:
    """Per-GCell maximum demand/capacity over the edges touching it."""
    result = BinGrid(grid.extent, grid.gcell, np.zeros((grid.nx, grid.ny)))
    values = result.values
    if per_layer:
        pairs = [
            (grid.layer_demand[k], grid.layer_capacity[k], grid.layers[k].is_horizontal)
            for k in range(len(grid.layers))
        ]
    else:
        pairs = [(grid.h_demand, grid.h_capacity, True), (grid.v_demand, grid.v_capacity, False)]
    for demand, capacity, horizontal in pairs:
        if demand.size == 0:
            continue
        ratio = _ratio(demand.astype(float), capacity.astype(float))
        if horizontal:
            values[:-1, :] = np.maximum(values[:-1, :], ratio)
            values[1:, :] = np.maximum(values[1:, :], ratio)
        else:
            values[:, :-1] = np.maximum(values[:, :-1], ratio)
            values[:, 1:] = np.maximum(values[:, 1:], ratio)
    return result
