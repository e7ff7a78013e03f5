"""Time-slicing MILP: slice grids, the formulation, schedule extraction and the
single-slice LP lower bound.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ifdp.errors import NoDeadlines, NumericalBreakdown, Unreachable
from ifdp.formulation import add_rate_block, block_vector, earliest_completion
from ifdp.guardrails import SolveGuard
from ifdp.lp_engine import LE, EQ, ModelBuilder, solve_lp
from ifdp.mip_engine import MipProblem, MipStatus, solve_mip
from ifdp.model import TIME_TOL, Schedule, SolveReport, SolveStatus, evaluate_schedule


MULTIPLIERS = {"1x": 1, "2x": 2, "3x": 3}

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SliceGrid:
    boundaries: tuple

    def __post_init__(self):
        bs = tuple(float(b) for b in self.boundaries)
        if len(bs) < 2 or bs[0] != 0.0:
            raise ValueError(f"Slice grid must start at 0 and contain a slice: {bs}")
        if any(b <= a for a, b in zip(bs, bs[1:])):
            raise ValueError(f"Slice boundaries must be strictly increasing: {bs}")
        object.__setattr__(self, "boundaries", bs)

    @classmethod
    def from_boundaries(cls, boundaries):
        return cls(tuple(boundaries))

    @property
    def count(self):
        return len(self.boundaries) - 1

    @property
    def lengths(self):
        return tuple(b - a for a, b in zip(self.boundaries, self.boundaries[1:]))

    def slices(self):
        return list(zip(self.boundaries, self.boundaries[1:]))

    def covers_deadlines(self, inst):
        """True when every bounded deadline coincides with a boundary."""
        return all(
            any(abs(fl.deadline - b) <= TIME_TOL for b in self.boundaries)
            for fl in inst.flows
            if fl.bounded
        )


def parse_multiplier(label):
    if isinstance(label, int):
        return label
    try:
        return MULTIPLIERS[label]
    except KeyError:
        raise ValueError(f"Unknown slice multiplier {label!r}; expected one of {sorted(MULTIPLIERS)}") from None


def default_horizon(inst):
    """Sequential completion bound sum e_f, stretched to the last bounded deadline."""
    total = math.fsum(earliest_completion(inst, f) for f in range(inst.flow_count))
    bounded = [fl.deadline for fl in inst.flows if fl.bounded]
    return max([total] + bounded)


def make_slices(inst, multiplier=1, horizon=None) -> SliceGrid:
    """Boundaries at the distinct deadlines, refined by bisecting the longest slice.

    Refinement stops once the grid holds multiplier * F slices; among
    equally long slices the earliest is split.
    """
    multiplier = parse_multiplier(multiplier)
    if multiplier < 1:
        raise ValueError(f"multiplier must be >= 1, got {multiplier}")
    points = sorted({fl.deadline for fl in inst.flows if fl.bounded})
    if any(not fl.bounded for fl in inst.flows):
        if horizon is None:
            if not points:
                raise NoDeadlines("Every flow is unbounded; a horizon is required")
            horizon = default_horizon(inst)
    if horizon is not None and (not points or horizon > points[-1] + TIME_TOL):
        points.append(float(horizon))
    boundaries = [0.0] + points
    target = multiplier * inst.flow_count
    if multiplier > 1:
        while len(boundaries) - 1 < target:
            lengths = [b - a for a, b in zip(boundaries, boundaries[1:])]
            longest = max(lengths)
            k = next(i for i, length in enumerate(lengths) if length >= longest - 1e-12)
            boundaries.insert(k + 1, boundaries[k] + lengths[k] / 2)
    return SliceGrid(tuple(boundaries))


@dataclass
class _TsaModel:
    problem: MipProblem
    grid: SliceGrid
    switches: list
    blocks: list


def _tsa_model(inst, grid: SliceGrid):
    builder = ModelBuilder()
    switches = []
    blocks = []
    delivery = {f: {} for f in range(inst.flow_count)}
    for t, ((start, end), length) in enumerate(zip(grid.slices(), grid.lengths)):
        w = builder.add_var(f"w[{t}]", upper=1.0, cost=length, integer=True)
        switches.append(w)
        flows = [f for f in range(inst.flow_count) if end <= inst.flow(f).deadline + TIME_TOL]
        block = add_rate_block(builder, inst, flows, integral=True, switch=w, tag=f"@{t}")
        blocks.append(block)
        for f in flows:
            r = block.rate[f]
            delivery[f][r] = length
            builder.add_row({r: length, w: -inst.flow(f).size}, LE, 0.0, name=f"use[{f}]@{t}")
        if t > 0:
            builder.add_row({w: 1.0, switches[t - 1]: -1.0}, LE, 0.0, name=f"consecutive@{t}")
    for f, terms in delivery.items():
        builder.add_row(terms, EQ, inst.flow(f).size, name=f"deliver[{f}]")
    return _TsaModel(MipProblem.from_builder(builder), grid, switches, blocks)


def build_tsa(inst, grid: SliceGrid) -> MipProblem:
    """The time-slicing MILP over grid: minimize the total length of used slices."""
    return _tsa_model(inst, grid).problem


def _extract(inst, model: _TsaModel, x):
    pairs = []
    for w, block, length in zip(model.switches, model.blocks, model.grid.lengths):
        if x[w] > 0.5:
            pairs.append((block_vector(inst, block, x), length))
    return Schedule.from_pairs(pairs)


def solve_tsa(inst, multiplier=1, time_limit=None, grid=None):
    """Solve the time-slicing MILP; returns (SolveReport, Schedule or None)."""
    guard = SolveGuard(time_limit)
    if grid is None:
        grid = make_slices(inst, multiplier)
        label = f"tsa-{parse_multiplier(multiplier)}x"
    else:
        label = "tsa-grid"
    model = _tsa_model(inst, grid)
    logger.info("%s: %d slice(s), %d variable(s)", label, grid.count, model.problem.lp.num_vars)
    sol = solve_mip(model.problem, time_limit=guard.remaining())
    bound = sol.best_bound if math.isfinite(sol.best_bound) else None

    if sol.status is MipStatus.INFEASIBLE:
        report = SolveReport(
            label, SolveStatus.INFEASIBLE, iterations=sol.nodes, nodes=sol.nodes,
            wall_time=guard.elapsed(), detail="GridOrInstanceInfeasible",
        )
        return report, None
    if sol.status is MipStatus.TIME_LIMIT:
        report = SolveReport(
            label, SolveStatus.TIME_LIMIT, lower_bound=bound, iterations=sol.nodes,
            nodes=sol.nodes, wall_time=guard.elapsed(),
        )
        return report, None

    schedule = _extract(inst, model, sol.x)
    evaluation = evaluate_schedule(inst, schedule)
    if not evaluation.feasible:
        raise NumericalBreakdown(f"Extracted TSA schedule failed evaluation: {evaluation.violations[0]}")
    status = SolveStatus.OPTIMAL if sol.status is MipStatus.OPTIMAL else SolveStatus.FEASIBLE
    report = SolveReport(
        label, status, objective=sol.objective,
        lower_bound=min(bound, sol.objective) if bound is not None else None,
        iterations=sol.nodes, nodes=sol.nodes, wall_time=guard.elapsed(),
    )
    logger.info("%s: %s objective %.9g", label, status.value, sol.objective)
    return report, schedule


def _rtsa_problem(inst):
    builder = ModelBuilder()
    block = add_rate_block(builder, inst, range(inst.flow_count), integral=True)
    rates = [block.rate[f] for f in range(inst.flow_count)]
    return builder.to_lp(), rates


def rtsa_lower_bound(inst, tol=1e-3, time_limit=None) -> float:
    """Largest T (within tol) whose single-slice [0, T] LP relaxation is infeasible.

    Deadlines are dropped: each flow must only deliver s_f within [0, T].
    """
    guard = SolveGuard(time_limit)
    for f in range(inst.flow_count):
        if math.isinf(earliest_completion(inst, f)):
            raise Unreachable(f"Flow {f} (input #{inst.external_index(f)}) has no usable path")
    lp, rates = _rtsa_problem(inst)
    sizes = np.array(inst.sizes())

    def feasible(T):
        guard.check_timeout()
        lower = lp.lower.copy()
        upper = lp.upper.copy()
        lower[rates] = sizes / T
        upper[rates] = sizes / T
        return solve_lp(lp.with_bounds(lower, upper)).optimal

    if feasible(tol):
        return 0.0
    hi = math.fsum(earliest_completion(inst, f) for f in range(inst.flow_count))
    for _ in range(30):
        if feasible(hi):
            break
        hi *= 2
    else:
        raise NumericalBreakdown(f"Single-slice LP never became feasible (last T={hi:g})")
    lo = tol
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    logger.info("rTSA lower bound %.6g", lo)
    return lo


