import logging
from unittest.mock import patch

import pytest

from ifdp.errors import PreconditionViolated, SolveTimeout
from ifdp.mfa import UNBOUNDED_WEIGHT, MfaWeights, mfa_step, solve_mfa
from ifdp.model import RateVector, SolveStatus, evaluate_schedule
from tests.conftest import make_instance


# ---------------------------------------------------------------------------
# TestMfaWeights
# ---------------------------------------------------------------------------


class TestMfaWeights:
    def test_inverse_square_deadlines(self, triangle):
        assert MfaWeights.default(triangle).values == pytest.approx((1.0, 0.25, 1 / 9))

    def test_unbounded_weight(self, single_arc):
        assert MfaWeights.default(single_arc).values == (UNBOUNDED_WEIGHT,)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError, match="strictly positive"):
            MfaWeights.custom([1.0, 0.0])


# ---------------------------------------------------------------------------
# TestMfaStep
# ---------------------------------------------------------------------------


class TestMfaStep:
    def test_prefers_earliest_deadline(self, triangle):
        vector = mfa_step(triangle, list(triangle.sizes()))
        assert vector.rates == pytest.approx((1.0, 0.0, 0.0))

    def test_skips_finished_flows(self, triangle):
        vector = mfa_step(triangle, [0.0, 1.5, 1.0])
        assert vector.rates == pytest.approx((0.0, 1.0, 0.0))

    def test_custom_weights(self, triangle):
        vector = mfa_step(triangle, list(triangle.sizes()), MfaWeights.custom([0.01, 0.01, 1.0]))
        assert vector.rates == pytest.approx((0.0, 0.0, 1.0))

    def test_nothing_remaining(self, triangle):
        with pytest.raises(PreconditionViolated):
            mfa_step(triangle, [0.0, 0.0, 0.0])


# ---------------------------------------------------------------------------
# TestSolveMfa
# ---------------------------------------------------------------------------


class TestSolveMfa:
    def test_triangle_segments(self, triangle):
        report, schedule = solve_mfa(triangle)
        assert report.status is SolveStatus.FEASIBLE
        assert report.solver == "mfa"
        assert report.objective == pytest.approx(3.0)
        assert report.iterations == 3
        assert [seg.duration for seg in schedule.segments] == pytest.approx([0.5, 1.5, 1.0])
        assert evaluate_schedule(triangle, schedule).feasible

    def test_deadline_miss(self, triangle_tight_a):
        report, schedule = solve_mfa(triangle_tight_a)
        assert report.status is SolveStatus.NO_SOLUTION
        assert "after deadline" in report.detail
        assert schedule is None

    def test_bad_weights_miss_deadline(self, triangle):
        report, _ = solve_mfa(triangle, weights=MfaWeights.custom([0.01, 0.01, 1.0]))
        assert report.status is SolveStatus.NO_SOLUTION

    def test_unbounded_flow(self, single_arc):
        report, schedule = solve_mfa(single_arc)
        assert report.objective == pytest.approx(1.5)
        assert schedule.segments[0].vector.rates == pytest.approx((2.0,))

    def test_stall_when_unreachable(self):
        inst = make_instance(3, [(0, 1), (2, 0)], [(0, 1, 1.0, None), (1, 2, 1.0, None)])
        report, schedule = solve_mfa(inst)
        assert report.status is SolveStatus.NO_SOLUTION
        assert "stalled" in report.detail
        assert schedule is None

    def test_concurrent_flows_share_a_step(self):
        inst = make_instance(
            4, [(0, 1), (2, 3)], [(0, 1, 1.0, 2.0), (2, 3, 1.0, 2.0)],
        )
        report, schedule = solve_mfa(inst)
        assert report.objective == pytest.approx(1.0)
        assert len(schedule.segments) == 1

    def test_step_log_names_completing_flows(self, caplog):
        inst = make_instance(
            4, [(0, 1), (2, 3)], [(0, 1, 1.0, 2.0), (2, 3, 1.0, 2.0)],
        )
        with caplog.at_level(logging.DEBUG, logger="ifdp.mfa"):
            solve_mfa(inst)
        assert "completing [0, 1]" in caplog.text

    def test_step_count_bounded_by_flows(self, star):
        report, _ = solve_mfa(star)
        assert report.iterations <= star.flow_count

    @patch("ifdp.mfa._step")
    def test_steps_follow_the_mip(self, mock_step, edf_pair):
        mock_step.side_effect = [
            (RateVector((1.0, 0.0)), 2),
            (RateVector((0.0, 1.0)), 3),
        ]
        report, schedule = solve_mfa(edf_pair)
        assert report.objective == pytest.approx(3.0)
        assert report.nodes == 5
        assert [seg.duration for seg in schedule.segments] == pytest.approx([1.0, 2.0])

    @patch("ifdp.mfa._step", side_effect=SolveTimeout("MFA rate MIP ran out of time"))
    def test_time_limit(self, mock_step, triangle):
        report, schedule = solve_mfa(triangle)
        assert report.status is SolveStatus.TIME_LIMIT
        assert schedule is None
