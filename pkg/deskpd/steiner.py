"""Rectilinear Steiner trees on integer grid coordinates.

Up to four terminals the tree is exact (Hanan-grid enumeration). Larger nets use
greedy insertion: the terminal closest to the current tree is attached at the
nearest point of an existing L-shaped edge, which becomes a Steiner point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, List, Sequence, Tuple

GridPoint = Tuple[int, int]

EXACT_LIMIT = 4


@dataclass
class SteinerTree:
    """Points (terminals first) and edges; an edge is drawn x-first then y."""

    points: List[GridPoint] = field(default_factory=list)
    edges: List[Tuple[int, int]] = field(default_factory=list)
    terminals: int = 0

    @property
    def length(self) -> int:
        return sum(_dist(self.points[a], self.points[b]) for a, b in self.edges)

    def segments(self) -> List[Tuple[GridPoint, GridPoint]]:
        return [(self.points[a], self.points[b]) for a, b in self.edges]


def _dist(a: GridPoint, b: GridPoint) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def _mst(points: Sequence[GridPoint]) -> Tuple[int, List[Tuple[int, int]]]:
    """Prim's algorithm; ties resolve to the lower index."""
    n = len(points)
    if n < 2:
        return 0, []
    in_tree = [False] * n
    best = [(_dist(points[0], p), 0) for p in points]
    in_tree[0] = True
    total = 0
    edges = []
    for _ in range(n - 1):
        k = min((i for i in range(n) if not in_tree[i]), key=lambda i: (best[i][0], i))
        in_tree[k] = True
        total += best[k][0]
        edges.append((best[k][1], k))
        for i in range(n):
            if not in_tree[i]:
                d = _dist(points[k], points[i])
                if d < best[i][0]:
                    best[i] = (d, k)
    return total, edges


def _prune(points: List[GridPoint], edges: List[Tuple[int, int]], terminals: int) -> SteinerTree:
    """Drop Steiner points left with degree one, then compact the point list."""
    changed = True
    while changed:
        changed = False
        degree = [0] * len(points)
        for a, b in edges:
            degree[a] += 1
            degree[b] += 1
        for k in range(terminals, len(points)):
            if degree[k] == 1:
                edges = [e for e in edges if k not in e]
                changed = True
                break
    used = sorted({i for e in edges for i in e} | set(range(terminals)))
    remap = {old: new for new, old in enumerate(used)}
    return SteinerTree(
        [points[i] for i in used], [(remap[a], remap[b]) for a, b in edges], terminals
    )


def _exact(terminals: List[GridPoint]) -> SteinerTree:
    xs = sorted({p[0] for p in terminals})
    ys = sorted({p[1] for p in terminals})
    hanan = [(x, y) for x in xs for y in ys if (x, y) not in terminals]
    best_len, best_edges = _mst(terminals)
    best_points = list(terminals)
    for count in range(1, len(terminals) - 1):
        for extra in combinations(hanan, count):
            points = list(terminals) + list(extra)
            length, edges = _mst(points)
            if length < best_len:
                best_len, best_edges, best_points = length, edges, points
    return _prune(best_points, best_edges, len(terminals))


def _nearest_on_edge(p: GridPoint, a: GridPoint, b: GridPoint) -> GridPoint:
    """Closest point to ``p`` on the x-first L path from ``a`` to ``b``."""
    lo, hi = sorted((a[0], b[0]))
    on_h = (min(max(p[0], lo), hi), a[1])
    lo, hi = sorted((a[1], b[1]))
    on_v = (b[0], min(max(p[1], lo), hi))
    return min(on_h, on_v, key=lambda q: (_dist(p, q), q))


def _greedy(terminals: List[GridPoint]) -> SteinerTree:
    points = list(terminals)
    edges: List[Tuple[int, int]] = []
    attached = {0}
    while len(attached) < len(terminals):
        best = None
        for t in range(len(terminals)):
            if t in attached:
                continue
            p = terminals[t]
            if not edges:
                candidates = [(_dist(p, points[i]), i, None, points[i]) for i in attached]
            else:
                candidates = []
                for e, (a, b) in enumerate(edges):
                    q = _nearest_on_edge(p, points[a], points[b])
                    candidates.append((_dist(p, q), e, (a, b), q))
            d, tag, edge, q = min(candidates, key=lambda c: (c[0], c[1]))
            if best is None or (d, t) < (best[0], best[1]):
                best = (d, t, tag, edge, q)
        _, t, tag, edge, q = best
        if edge is None:
            edges.append((tag, t))
        else:
            a, b = edge
            if q == points[a]:
                edges.append((a, t))
            elif q == points[b]:
                edges.append((b, t))
            else:
                points.append(q)
                s = len(points) - 1
                edges[tag] = (a, s)
                edges.append((s, b))
                edges.append((s, t))
        attached.add(t)
    return SteinerTree(points, edges, len(terminals))


def rsmt(terminals: Iterable[GridPoint]) -> SteinerTree:
    """Rectilinear Steiner tree over the distinct ``terminals`` (order preserved)."""
    unique: List[GridPoint] = []
    for p in terminals:
        p = (int(p[0]), int(p[1]))
        if p not in unique:
            unique.append(p)
    if len(unique) < 2:
        return SteinerTree(unique, [], len(unique))
    if len(unique) <= EXACT_LIMIT:
        return _exact(unique)
    return _greedy(unique)
