"""RC trees and Elmore delay.

Resistance in Ω, capacitance in fF; Ω·fF = 1e-15 s, reported delays are ns.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import CycleDetected

OHM_FF_TO_NS = 1e-6


@dataclass
class RcTree:
    """Rooted tree; node 0 is the driver. Parents always precede children."""

    parent: List[int] = field(default_factory=lambda: [-1])
    resistance: List[float] = field(default_factory=lambda: [0.0])
    capacitance: List[float] = field(default_factory=lambda: [0.0])
    driver_resistance: float = 0.0
    _delays: Optional[List[float]] = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.parent)

    def add_node(self, parent: int, resistance: float, capacitance: float = 0.0) -> int:
        if not 0 <= parent < len(self.parent):
            raise ValueError(f"parent {parent} does not exist")
        self.parent.append(parent)
        self.resistance.append(resistance)
        self.capacitance.append(capacitance)
        self._delays = None
        return len(self.parent) - 1

    def add_cap(self, node: int, capacitance: float) -> None:
        self.capacitance[node] += capacitance
        self._delays = None

    @classmethod
    def from_edges(
        cls,
        count: int,
        edges: Sequence[Tuple[int, int, float]],
        caps: Sequence[float],
        root: int = 0,
        driver_resistance: float = 0.0,
    ) -> Tuple["RcTree", List[int]]:
        """Build from undirected edges ``(u, v, R)``; returns the tree and the node renumbering."""
        if len(edges) != count - 1:
            raise CycleDetected(f"{len(edges)} edges over {count} nodes is not a tree")
        adjacency: Dict[int, List[Tuple[int, float]]] = {i: [] for i in range(count)}
        for u, v, r in edges:
            adjacency[u].append((v, r))
            adjacency[v].append((u, r))
        order = {root: 0}
        tree = cls(capacitance=[caps[root]], driver_resistance=driver_resistance)
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v, r in adjacency[u]:
                if v in order:
                    if tree.parent[order[u]] != order[v]:
                        raise CycleDetected(f"edge {u}-{v} closes a loop")
                    continue
                order[v] = tree.add_node(order[u], r, caps[v])
                queue.append(v)
        if len(order) != count:
            raise CycleDetected("RC graph is disconnected")
        return tree, [order[i] for i in range(count)]

    def downstream_caps(self) -> List[float]:
        down = list(self.capacitance)
        for node in range(len(self.parent) - 1, 0, -1):
            down[self.parent[node]] += down[node]
        return down

    @property
    def total_cap(self) -> float:
        return sum(self.capacitance)

    def elmore(self) -> List[float]:
        """Elmore delay (ns) from the driver to every node."""
        if self._delays is None:
            down = self.downstream_caps()
            delays = [self.driver_resistance * down[0] * OHM_FF_TO_NS]
            for node in range(1, len(self.parent)):
                delays.append(
                    delays[self.parent[node]] + self.resistance[node] * down[node] * OHM_FF_TO_NS
                )
            self._delays = delays
        return self._delays

    def path_resistance(self, node: int) -> float:
        total = 0.0
        while node > 0:
            total += self.resistance[node]
            node = self.parent[node]
        return total


def elmore_delay(tree: RcTree, node: int) -> float:
    """Σ over the driver-to-node path of resistance × downstream capacitance, in ns."""
    return tree.elmore()[node]
