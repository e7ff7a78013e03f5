"""Max-flow based heuristic: repeatedly run the deadline-weighted rate MIP on
the remaining demand until every flow completes or a deadline is missed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from ifdp.errors import NumericalBreakdown, PreconditionViolated, SolveTimeout
from ifdp.formulation import add_rate_block, block_vector
from ifdp.guardrails import SolveGuard
from ifdp.lp_engine import ModelBuilder
from ifdp.mip_engine import MipProblem, MipStatus, solve_mip
from ifdp.model import TIME_TOL, Schedule, SolveReport, SolveStatus


UNBOUNDED_WEIGHT = 1e-6
REMAINING_TOL = 1e-9

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MfaWeights:
    """Per-flow objective weights in internal order."""

    values: tuple

    def __post_init__(self):
        values = tuple(float(w) for w in self.values)
        bad = [w for w in values if not w > 0]
        if bad:
            raise ValueError(f"MFA weights must be strictly positive, got {bad}")
        object.__setattr__(self, "values", values)

    @classmethod
    def default(cls, inst):
        """w_f = 1 / t_f^2, with a tiny weight for unbounded flows."""
        return cls(tuple(
            1.0 / fl.deadline ** 2 if fl.bounded else UNBOUNDED_WEIGHT
            for fl in inst.ordered
        ))

    @classmethod
    def custom(cls, values):
        return cls(tuple(values))


def _step(inst, remaining, weights, time_limit=None):
    active = [f for f in range(inst.flow_count) if remaining[f] > 0]
    if not active:
        raise PreconditionViolated("mfa_step needs at least one flow with remaining size")
    builder = ModelBuilder()
    block = add_rate_block(builder, inst, active, integral=True, tag="|mfa")
    for f in active:
        builder.set_cost(block.rate[f], -weights.values[f])
    if not block.arc_rate:
        return block_vector(inst, block, [0.0] * builder.num_vars), 0
    sol = solve_mip(MipProblem.from_builder(builder), time_limit=time_limit)
    if sol.status is MipStatus.TIME_LIMIT:
        raise SolveTimeout("MFA rate MIP ran out of time")
    if sol.status is MipStatus.INFEASIBLE:
        raise NumericalBreakdown("MFA rate MIP reported infeasible; the zero vector is always feasible")
    return block_vector(inst, block, sol.x), sol.nodes


def mfa_step(inst, remaining, weights=None):
    """Weighted maximum rate vector over the flows that still have data to send."""
    weights = weights or MfaWeights.default(inst)
    return _step(inst, remaining, weights)[0]


def solve_mfa(inst, time_limit=None, weights=None):
    """Run the heuristic; returns (SolveReport, Schedule or None)."""
    guard = SolveGuard(time_limit)
    weights = weights or MfaWeights.default(inst)
    F = inst.flow_count
    remaining = list(inst.sizes())
    pairs = []
    clock = 0.0
    loops = 0
    nodes = 0

    def finish(status, detail=""):
        report = SolveReport(
            "mfa", status,
            objective=clock if status is SolveStatus.FEASIBLE else None,
            iterations=loops, nodes=nodes, wall_time=guard.elapsed(), detail=detail,
        )
        logger.info("mfa: %s after %d step(s) %s", status.value, loops, detail)
        return report

    while any(s > 0 for s in remaining):
        loops += 1
        if loops > F:
            raise NumericalBreakdown(f"MFA ran {loops} steps for {F} flows")
        try:
            guard.check_timeout()
            vector, step_nodes = _step(inst, remaining, weights, guard.remaining())
        except SolveTimeout:
            return finish(SolveStatus.TIME_LIMIT), None
        nodes += step_nodes
        positive = [f for f in vector.positive_flows() if remaining[f] > 0]
        if not positive:
            return finish(SolveStatus.NO_SOLUTION, "stalled: no flow can make progress"), None
        times = {f: remaining[f] / vector.rates[f] for f in positive}
        delta = min(times.values())
        left = {f: remaining[f] - vector.rates[f] * delta for f in positive}
        completing = [
            f for f in positive
            if times[f] == delta or left[f] <= REMAINING_TOL * max(1.0, inst.flow(f).size)
        ]
        for f in completing:
            if clock + delta > inst.flow(f).deadline + TIME_TOL:
                return finish(
                    SolveStatus.NO_SOLUTION,
                    f"flow {f} would finish at {clock + delta:.9g} after deadline {inst.flow(f).deadline:.9g}",
                ), None
        logger.debug("mfa step %d: delta %.9g, completing %s", loops, delta, completing)
        pairs.append((vector, delta))
        for f in positive:
            remaining[f] = 0.0 if f in completing else left[f]
        clock += delta

    return finish(SolveStatus.FEASIBLE), Schedule.from_pairs(pairs)
