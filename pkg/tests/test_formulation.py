import math

import pytest

from ifdp.formulation import (
    add_rate_block,
    block_vector,
    earliest_completion,
    max_single_flow_rate,
    max_single_flow_vector,
)
from ifdp.lp_engine import ModelBuilder
from ifdp.mip_engine import MipProblem, MipStatus, solve_mip
from ifdp.model import check_rate_vector
from tests.conftest import make_instance


# ---------------------------------------------------------------------------
# TestSingleFlowRate
# ---------------------------------------------------------------------------


class TestSingleFlowRate:
    def test_triangle(self, triangle):
        assert [max_single_flow_rate(triangle, f) for f in range(3)] == pytest.approx([1.0, 1.0, 1.0])

    def test_vector_is_valid(self, triangle):
        vector = max_single_flow_vector(triangle, 1)
        assert vector.positive_flows() == (1,)
        assert check_rate_vector(triangle, vector) == []

    def test_whole_units_only(self):
        inst = make_instance(2, [(0, 1, 1.5)], [(0, 1, 1.0, None)])
        assert max_single_flow_rate(inst, 0) == pytest.approx(1.0)
        continuous = max_single_flow_vector(inst, 0, integral=False)
        assert continuous.rates[0] == pytest.approx(1.5)

    def test_mixed_units(self):
        inst = make_instance(2, [(0, 1, 5.0)], [(0, 1, 1.0, None)], units=(2.0, 3.0))
        assert max_single_flow_rate(inst, 0) == pytest.approx(5.0)

    def test_parallel_paths_add_up(self):
        inst = make_instance(
            4, [(0, 1), (1, 3), (0, 2), (2, 3)], [(0, 3, 4.0, None)],
        )
        assert max_single_flow_rate(inst, 0) == pytest.approx(2.0)
        assert earliest_completion(inst, 0) == pytest.approx(2.0)


# ---------------------------------------------------------------------------
# TestEarliestCompletion
# ---------------------------------------------------------------------------


class TestEarliestCompletion:
    def test_single_arc(self, single_arc):
        assert earliest_completion(single_arc, 0) == pytest.approx(1.5)

    def test_unreachable_is_infinite(self):
        inst = make_instance(2, [(1, 0)], [(0, 1, 1.0, None)])
        assert math.isinf(earliest_completion(inst, 0))

    def test_capacity_below_unit_is_infinite(self):
        inst = make_instance(2, [(0, 1, 0.5)], [(0, 1, 1.0, None)])
        assert math.isinf(earliest_completion(inst, 0))


# ---------------------------------------------------------------------------
# TestRateBlock
# ---------------------------------------------------------------------------


class TestRateBlock:
    def test_shared_arc_capacity(self):
        inst = make_instance(2, [(0, 1, 2.0)], [(0, 1, 3.0, None), (0, 1, 1.0, None)])
        builder = ModelBuilder()
        block = add_rate_block(builder, inst, (0, 1))
        for var in block.rate.values():
            builder.set_cost(var, -1.0)
        sol = solve_mip(MipProblem.from_builder(builder))
        assert sol.status is MipStatus.OPTIMAL
        vector = block_vector(inst, block, sol.x)
        assert sum(vector.rates) == pytest.approx(2.0)
        assert check_rate_vector(inst, vector) == []

    def test_switch_closes_capacity(self, single_arc):
        builder = ModelBuilder()
        w = builder.add_var("w", upper=0.0)
        block = add_rate_block(builder, single_arc, (0,), switch=w)
        builder.set_cost(block.rate[0], -1.0)
        sol = solve_mip(MipProblem.from_builder(builder))
        assert sol.objective == pytest.approx(0.0)

    def test_unreachable_rate_fixed_at_zero(self):
        inst = make_instance(3, [(1, 0), (1, 2)], [(0, 1, 1.0, None), (1, 2, 1.0, None)])
        builder = ModelBuilder()
        block = add_rate_block(builder, inst, (0, 1))
        lp = builder.to_lp()
        assert lp.upper[block.rate[0]] == 0.0
        assert not any(f == 0 for f, _ in block.arc_rate)

    def test_names_carry_tag(self, triangle):
        builder = ModelBuilder()
        add_rate_block(builder, triangle, (0,), tag="@3")
        lp = builder.to_lp()
        assert all(name.endswith("@3") for name in lp.var_names)
        assert "cap[0]@3" in lp.row_names
