import math

import pytest

from ifdp.errors import NoDeadlines, Unreachable
from ifdp.model import SolveStatus, evaluate_schedule
from ifdp.tsa import (
    SliceGrid,
    build_tsa,
    default_horizon,
    make_slices,
    parse_multiplier,
    rtsa_lower_bound,
    solve_tsa,
)
from tests.conftest import make_instance


# ---------------------------------------------------------------------------
# TestSliceGrid
# ---------------------------------------------------------------------------


class TestSliceGrid:
    def test_lengths(self):
        grid = SliceGrid((0, 0.5, 2, 3))
        assert grid.count == 3
        assert grid.lengths == (0.5, 1.5, 1.0)
        assert grid.slices() == [(0.0, 0.5), (0.5, 2.0), (2.0, 3.0)]

    def test_must_start_at_zero(self):
        with pytest.raises(ValueError, match="start at 0"):
            SliceGrid((1.0, 2.0))

    def test_strictly_increasing(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            SliceGrid((0.0, 2.0, 2.0))

    def test_covers_deadlines(self, triangle):
        assert SliceGrid((0, 1, 2, 3)).covers_deadlines(triangle)
        assert not SliceGrid((0, 1.5, 3)).covers_deadlines(triangle)


# ---------------------------------------------------------------------------
# TestMakeSlices
# ---------------------------------------------------------------------------


class TestMakeSlices:
    def test_one_slice_per_deadline(self, triangle):
        assert make_slices(triangle, 1).boundaries == (0.0, 1.0, 2.0, 3.0)

    def test_refined_grid(self, triangle):
        grid = make_slices(triangle, "2x")
        assert grid.count == 6
        assert grid.boundaries == (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
        assert grid.covers_deadlines(triangle)

    def test_three_x(self, triangle):
        assert make_slices(triangle, 3).count == 9

    def test_unknown_multiplier(self):
        with pytest.raises(ValueError, match="Unknown slice multiplier"):
            parse_multiplier("4x")

    def test_all_unbounded_needs_horizon(self, single_arc):
        with pytest.raises(NoDeadlines):
            make_slices(single_arc)
        assert make_slices(single_arc, horizon=2.0).boundaries == (0.0, 2.0)

    def test_unbounded_flow_extends_horizon(self):
        inst = make_instance(2, [(0, 1)], [(0, 1, 1.0, 1.0), (0, 1, 4.0, None)])
        assert default_horizon(inst) == pytest.approx(5.0)
        assert make_slices(inst).boundaries == (0.0, 1.0, 5.0)


# ---------------------------------------------------------------------------
# TestSolveTsa
# ---------------------------------------------------------------------------


class TestSolveTsa:
    def test_coarse_grid_is_infeasible(self, triangle):
        report, schedule = solve_tsa(triangle, "1x")
        assert report.status is SolveStatus.INFEASIBLE
        assert report.detail == "GridOrInstanceInfeasible"
        assert schedule is None

    def test_refined_grid_is_optimal(self, triangle):
        report, schedule = solve_tsa(triangle, "2x")
        assert report.status is SolveStatus.OPTIMAL
        assert report.solver == "tsa-2x"
        assert report.objective == pytest.approx(3.0)
        evaluation = evaluate_schedule(triangle, schedule)
        assert evaluation.feasible
        assert evaluation.completion == pytest.approx(3.0)

    def test_explicit_uneven_grid(self, triangle):
        report, _ = solve_tsa(triangle, grid=SliceGrid((0, 0.5, 2, 3)))
        assert report.solver == "tsa-grid"
        assert report.objective == pytest.approx(3.0)

    def test_tight_deadline_infeasible(self, triangle_tight_a):
        report, _ = solve_tsa(triangle_tight_a, "2x")
        assert report.status is SolveStatus.INFEASIBLE

    def test_unbounded_flow_uses_whole_slice(self, single_arc):
        report, schedule = solve_tsa(single_arc, grid=SliceGrid((0, 2.0)))
        assert report.objective == pytest.approx(2.0)
        assert schedule.segments[0].vector.rates[0] == pytest.approx(1.5)

    def test_edf_pair(self, edf_pair):
        report, _ = solve_tsa(edf_pair, "2x")
        assert report.objective == pytest.approx(3.0)

    def test_switches_are_integer(self, triangle):
        problem = build_tsa(triangle, make_slices(triangle))
        names = [problem.lp.var_names[i] for i in problem.integer]
        assert {"w[0]", "w[1]", "w[2]"} <= set(names)


# ---------------------------------------------------------------------------
# TestRtsaLowerBound
# ---------------------------------------------------------------------------


class TestRtsaLowerBound:
    def test_triangle(self, triangle):
        assert rtsa_lower_bound(triangle) == pytest.approx(2.5, abs=0.01)

    def test_ignores_deadlines(self, triangle, triangle_tight_a):
        assert rtsa_lower_bound(triangle_tight_a) == pytest.approx(rtsa_lower_bound(triangle), abs=0.01)

    def test_single_arc(self, single_arc):
        assert rtsa_lower_bound(single_arc) == pytest.approx(1.5, abs=0.01)

    def test_not_above_optimum(self, triangle):
        bound = rtsa_lower_bound(triangle)
        assert bound <= 3.0

    def test_unreachable(self):
        inst = make_instance(2, [(1, 0)], [(0, 1, 1.0, None)])
        with pytest.raises(Unreachable):
            rtsa_lower_bound(inst)

    def test_tolerance(self, triangle):
        coarse = rtsa_lower_bound(triangle, tol=0.1)
        assert math.isclose(coarse, 2.5, abs_tol=0.1)
