"""Test RC trees and Elmore delay."""

from __future__ import annotations

import pytest

from deskpd.errors import CycleDetected
from deskpd.rc import RcTree, elmore_delay


class TestElmore:
    """Test Elmore delay on hand-computed trees."""

    def test_chain(self) -> None:
        """Test a driver and a two-segment wire."""
        tree = RcTree(driver_resistance=100.0)
        a = tree.add_node(0, 1000.0, 10.0)
        b = tree.add_node(a, 1000.0, 20.0)
        assert tree.total_cap == pytest.approx(30.0)
        assert elmore_delay(tree, 0) == pytest.approx(0.003)
        assert elmore_delay(tree, a) == pytest.approx(0.033)
        assert elmore_delay(tree, b) == pytest.approx(0.053)

    def test_branches(self) -> None:
        """Test that a side branch loads the shared trunk only."""
        tree = RcTree()
        a = tree.add_node(0, 10.0, 5.0)
        b = tree.add_node(a, 10.0, 5.0)
        c = tree.add_node(a, 20.0, 10.0)
        assert elmore_delay(tree, a) == pytest.approx(2.0e-4)
        assert elmore_delay(tree, b) == pytest.approx(2.5e-4)
        assert elmore_delay(tree, c) == pytest.approx(4.0e-4)

    def test_added_cap_invalidates(self) -> None:
        """Test that adding load capacitance updates cached delays."""
        tree = RcTree()
        a = tree.add_node(0, 100.0, 1.0)
        before = elmore_delay(tree, a)
        tree.add_cap(a, 1.0)
        assert elmore_delay(tree, a) == pytest.approx(2 * before)


class TestFromEdges:
    """Test building trees from undirected edge lists."""

    def test_renumbering(self) -> None:
        """Test rooting at a node other than 0."""
        tree, index = RcTree.from_edges(3, [(0, 1, 10.0), (1, 2, 10.0)], [1.0, 2.0, 3.0], root=2)
        assert index[2] == 0
        assert tree.parent[index[0]] == index[1]
        assert elmore_delay(tree, index[0]) > elmore_delay(tree, index[1])

    def test_loop(self) -> None:
        """Test that a repeated edge is reported as a loop."""
        with pytest.raises(CycleDetected):
            RcTree.from_edges(3, [(0, 1, 1.0), (0, 1, 1.0)], [0.0, 0.0, 0.0])

    def test_edge_count(self) -> None:
        """Test that too many edges cannot form a tree."""
        with pytest.raises(CycleDetected):
            RcTree.from_edges(2, [(0, 1, 1.0), (1, 0, 1.0)], [0.0, 0.0])
