"""Test global placement, legalization, detailed placement and filler insertion."""

from __future__ import annotations

import itertools
from typing import Tuple

import pytest

from deskpd.db import (
    Blockage,
    BlockageKind,
    CellClass,
    Design,
    PlacementStatus,
    Point,
    Rect,
    ViolationKind,
)
from deskpd.errors import NoFillerMasters, NoMovableCells, PreconditionViolated
from deskpd.evaluate import total_hpwl
from deskpd.floorplan import init_floorplan
from deskpd.legalize import (
    _reorder_pass,
    check_placement,
    detailed_place,
    insert_fillers,
    legalize,
)
from deskpd.models import FloorplanSpec, PlacerConfig
from deskpd.place import global_place, random_place

SINGLE_V = """module single (a, y);
  input a;
  output y;
  BUFX1 u1 (.A(a), .Y(y));
endmodule
"""

CHAIN_V = """module chain (a, y);
  input a;
  output y;
  wire n;
  BUFX1 u1 (.A(a), .Y(n));
  BUFX1 u2 (.A(n), .Y(y));
endmodule
"""

PAIR_V = """module pair (a, y);
  input a;
  output y;
  wire n;
  INVX1 u1 (.A(a), .Y(n));
  INVX1 u2 (.A(n), .Y(y));
endmodule
"""

TRIPLE_V = """module triple (a, b, c, x, y, z);
  input a, b, c;
  output x, y, z;
  INVX1 u1 (.A(a), .Y(x));
  INVX1 u2 (.A(b), .Y(y));
  INVX1 u3 (.A(c), .Y(z));
endmodule
"""


def _ports_across(design: Design) -> Tuple[int, int]:
    """Pin ``a`` and ``y`` on one horizontal line inside the core; returns (left, span)."""
    core = design.core
    y = design.rows[len(design.rows) // 2].origin.y + design.row_height() // 2
    left = core.ll.x + core.width // 10
    right = core.ur.x - core.width // 10
    design.port("a").location = Point(left, y)
    design.port("y").location = Point(right, y)
    return left, right - left


def _center_x(design: Design, name: str) -> float:
    inst = design.instance(name)
    return inst.location.x + inst.width / 2


def _put(design: Design, name: str, x: int, y: int) -> None:
    inst = design.instance(name)
    inst.location = Point(x, y)
    inst.status = PlacementStatus.PLACED


class TestGlobalPlace:
    """Test the analytic placer."""

    def test_all_movables_inside_core(self, floorplanned) -> None:
        """Test that every movable cell is placed inside the core."""
        design = floorplanned("bench50")
        global_place(design, PlacerConfig(max_iterations=100, spread_iterations=20, seed=7))
        for inst in design.instances:
            assert inst.status == PlacementStatus.PLACED
            assert design.core.contains(inst.bbox)

    def test_beats_random(self, floorplanned) -> None:
        """Test that wirelength-driven placement beats a random baseline after legalization."""
        placed = floorplanned("bench50")
        global_place(placed, PlacerConfig(max_iterations=100, spread_iterations=20, seed=7))
        legalize(placed)
        baseline = floorplanned("bench50")
        random_place(baseline, seed=7)
        legalize(baseline)
        assert total_hpwl(placed) < total_hpwl(baseline)

    def test_deterministic(self, floorplanned) -> None:
        """Test that equal inputs give equal placements."""
        runs = []
        for _ in range(2):
            design = floorplanned("bench50")
            global_place(design, PlacerConfig(max_iterations=50, spread_iterations=10, seed=3))
            runs.append([inst.location for inst in design.instances])
        assert runs[0] == runs[1]

    def test_requires_rows(self, bench) -> None:
        """Test the floorplan precondition."""
        with pytest.raises(PreconditionViolated):
            global_place(bench("bench50"))

    def test_no_movable_cells(self, make_design) -> None:
        """Test that an empty module has nothing to place."""
        design = make_design("module empty (a);\n  input a;\nendmodule\n")
        init_floorplan(design, FloorplanSpec())
        with pytest.raises(NoMovableCells):
            global_place(design)

    def test_seed_sets_start_positions(self, floorplanned) -> None:
        """Test that the seed decides where unplaced cells start."""
        cfg = PlacerConfig(max_iterations=1, spread_iterations=0)
        runs = []
        for seed in (1, 2):
            design = floorplanned("bench50")
            global_place(design, cfg.model_copy(update={"seed": seed}))
            runs.append([inst.location for inst in design.instances])
        assert runs[0] != runs[1]

    def test_single_cell_sits_at_midpoint(self, make_design) -> None:
        """Test that a buffer between two fixed ports lands halfway."""
        design = make_design(SINGLE_V)
        init_floorplan(design, FloorplanSpec(utilization=0.001))
        left, span = _ports_across(design)
        global_place(design, PlacerConfig(spread_iterations=0))
        assert abs(_center_x(design, "u1") - (left + span / 2)) <= span / 100

    def test_chain_spaces_evenly(self, make_design) -> None:
        """Test that a two-buffer chain splits the port span in thirds."""
        design = make_design(CHAIN_V)
        init_floorplan(design, FloorplanSpec(utilization=0.001))
        left, span = _ports_across(design)
        global_place(design, PlacerConfig(spread_iterations=0))
        assert abs(_center_x(design, "u1") - (left + span / 3)) <= span / 90
        assert abs(_center_x(design, "u2") - (left + 2 * span / 3)) <= span / 90


class TestLegalize:
    """Test Abacus legalization and the placement checker."""

    def test_legal_after_legalize(self, placed_bench50) -> None:
        """Test that legalization leaves no overlaps or off-site cells."""
        assert check_placement(placed_bench50) == []

    def test_rows_orient_cells(self, placed_bench50) -> None:
        """Test that each cell takes its row's orientation."""
        by_y = {row.origin.y: row.orient for row in placed_bench50.rows}
        for inst in placed_bench50.instances:
            assert inst.orient == by_y[inst.location.y]

    def test_unplaced_reported(self, floorplanned) -> None:
        """Test that unplaced movables are reported by the checker and refused by legalize."""
        design = floorplanned("bench50")
        kinds = {v.kind for v in check_placement(design)}
        assert kinds == {ViolationKind.UNPLACED}
        with pytest.raises(PreconditionViolated):
            legalize(design)

    def test_random_then_legalize(self, floorplanned) -> None:
        """Test that legalization repairs an arbitrary overlapping start."""
        design = floorplanned("bench50")
        random_place(design, seed=11)
        assert any(v.kind == ViolationKind.OVERLAP for v in check_placement(design))
        legalize(design)
        assert check_placement(design) == []

    def test_tie_goes_to_lower_id(self, make_design) -> None:
        """Test that two cells dropped on one site split around it, lower id on the left."""
        design = make_design(PAIR_V)
        init_floorplan(design, FloorplanSpec(utilization=0.05))
        row = design.rows[len(design.rows) // 2]
        target = Point(row.origin.x + 10 * row.site.width, row.origin.y)
        for inst in design.instances:
            _put(design, inst.name, target.x, target.y)
        legalize(design)
        first, second = sorted(design.instances, key=lambda inst: inst.id)
        assert first.location.y == second.location.y == row.origin.y
        assert second.location.x == first.location.x + first.width
        assert sum(inst.location.manhattan(target) for inst in design.instances) == first.width

    def test_legal_placement_is_fixpoint(self, placed_bench50) -> None:
        """Test that legalizing a legal placement moves nothing."""
        before = [(inst.location, inst.orient) for inst in placed_bench50.instances]
        legalize(placed_bench50)
        assert [(inst.location, inst.orient) for inst in placed_bench50.instances] == before


class TestDetailedPlace:
    """Test the local improvement passes."""

    def test_hpwl_never_increases(self, placed_bench50) -> None:
        """Test that detailed placement keeps legality and does not grow HPWL."""
        before = total_hpwl(placed_bench50)
        detailed_place(placed_bench50, PlacerConfig(detailed_passes=3))
        assert total_hpwl(placed_bench50) <= before
        assert check_placement(placed_bench50) == []

    def test_triple_reorder_is_exhaustive(self, make_design) -> None:
        """Test that reordering an abutting triple finds the best of all six orders."""
        design = make_design(TRIPLE_V)
        init_floorplan(design, FloorplanSpec(utilization=0.05))
        row = design.rows[0]
        names = ["u1", "u2", "u3"]
        width = design.instance("u1").width
        start = row.origin.x + 10 * row.site.width
        y = row.origin.y + row.height // 2
        ports = {
            ("a", "x"): design.core.ur.x,
            ("b", "y"): start + 3 * width // 2,
            ("c", "z"): design.core.ll.x,
        }
        for pair, x in ports.items():
            for name in pair:
                design.port(name).location = Point(x, y)

        def arrange(order) -> int:
            for k, name in enumerate(order):
                _put(design, name, start + k * width, row.origin.y)
            return total_hpwl(design)

        best = min(arrange(order) for order in itertools.permutations(names))
        before = arrange(names)
        gain = _reorder_pass(design)
        assert total_hpwl(design) == best
        assert gain == before - best > 0
        order = sorted(names, key=lambda name: design.instance(name).location.x)
        assert order == ["u3", "u2", "u1"]



class TestFillers:
    """Test filler insertion."""

    def test_rows_fully_covered(self, placed_bench50) -> None:
        """Test that fillers close every gap and stay legal."""
        design = placed_bench50
        insert_fillers(design)
        assert check_placement(design) == []
        for row in design.rows:
            used = sum(
                inst.width
                for inst in design.instances
                if inst.is_placed and inst.location.y == row.origin.y
            )
            assert used == row.count * row.site.width
        fillers = [i for i in design.instances if i.master.cls == CellClass.FILLER]
        assert fillers and all(i.is_fixed for i in fillers)

    def test_no_filler_masters(self, placed_bench50) -> None:
        """Test that an empty master list is an error."""
        with pytest.raises(NoFillerMasters):
            insert_fillers(placed_bench50, [])

    def _gap_design(self, make_design) -> Design:
        """Design whose only free sites are sites 10 to 16 of the bottom row."""
        design = make_design(PAIR_V)
        init_floorplan(design, FloorplanSpec(utilization=0.05))
        core, row = design.core, design.rows[0]
        sw, y0, y1 = row.site.width, row.origin.y, row.origin.y + row.height
        for rect in (
            Rect(Point(core.ll.x, y1), core.ur),
            Rect(Point(core.ll.x, y0), Point(row.origin.x + 10 * sw, y1)),
            Rect(Point(row.origin.x + 17 * sw, y0), Point(core.ur.x, y1)),
        ):
            design.blockages.append(Blockage(BlockageKind.PLACEMENT, rect))
        return design

    def test_widest_first_tiling(self, make_design, tech) -> None:
        """Test that a seven-site gap takes a four, a two and a one."""
        design = self._gap_design(make_design)
        insert_fillers(design, [tech.master(n) for n in ("FILL1", "FILL2", "FILL4")])
        row = design.rows[0]
        sw = row.site.width
        fillers = sorted(
            (i for i in design.instances if i.master.cls == CellClass.FILLER),
            key=lambda inst: inst.location.x,
        )
        assert [(i.master.name, (i.location.x - row.origin.x) // sw) for i in fillers] == [
            ("FILL4", 10),
            ("FILL2", 14),
            ("FILL1", 16),
        ]
        assert not any("unfilled" in w for w in design.warnings)

    def test_residual_gap_warning(self, make_design, tech) -> None:
        """Test that a gap the fillers cannot close is reported."""
        design = self._gap_design(make_design)
        insert_fillers(design, [tech.master("FILL2")])
        fillers = [i for i in design.instances if i.master.cls == CellClass.FILLER]
        assert len(fillers) == 3
        assert [w for w in design.warnings if "unfilled" in w] == [
            f"row {design.rows[0].name}: 1 site(s) left unfilled at site 16"
        ]
