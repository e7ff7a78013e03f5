"""Branch-and-bound over the LP relaxation of mixed-integer problems.

One depth-first dive (rounding toward the nearer integer) finds an early
incumbent, then open nodes are processed best-bound first. Branching picks
the most fractional integer variable, lowest index on ties.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ifdp.errors import MalformedProblem, NumericalBreakdown
from ifdp.guardrails import SolveGuard
from ifdp.lp_engine import LpProblem, LpStatus, ModelBuilder, solve_lp


INT_TOL = 1e-6
PRUNE_TOL = 1e-9

logger = logging.getLogger(__name__)


class MipStatus(str, Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    TIME_LIMIT = "TimeLimit"


@dataclass(frozen=True, eq=False)
class MipProblem:
    """An LpProblem plus the indices of integer-restricted variables."""

    lp: LpProblem
    integer: tuple = ()

    def __post_init__(self):
        integer = tuple(sorted(set(int(i) for i in self.integer)))
        n = self.lp.num_vars
        outside = [i for i in integer if i < 0 or i >= n]
        if outside:
            raise MalformedProblem(f"Integer indices out of range: {outside}")
        unbounded = [i for i in integer if not math.isfinite(self.lp.upper[i])]
        if unbounded:
            raise MalformedProblem(f"Integer variables need finite upper bounds: {unbounded}")
        object.__setattr__(self, "integer", integer)

    @classmethod
    def from_builder(cls, builder: ModelBuilder):
        return cls(builder.to_lp(), builder.integer_indices)


@dataclass(frozen=True, eq=False)
class MipSolution:
    status: MipStatus
    x: np.ndarray | None = None
    objective: float | None = None
    best_bound: float = -math.inf
    nodes: int = 0
    bound_trace: tuple = ()

    @property
    def has_incumbent(self):
        return self.x is not None


def _prune_gap(incumbent):
    if not math.isfinite(incumbent):
        return 0.0
    return PRUNE_TOL * max(1.0, abs(incumbent))


def solve_mip(p: MipProblem, time_limit=None, cutoff=None, node_limit=None) -> MipSolution:
    """Solve a minimization MIP by branch-and-bound.

    time_limit: seconds, None for no limit. cutoff: stop as soon as an
    incumbent with objective < cutoff is found (status Feasible).
    """
    guard = SolveGuard(time_limit) if time_limit is not None else None
    integer = np.array(p.integer, dtype=int)
    counter = itertools.count()
    heap = []
    dive = (p.lp.lower.copy(), p.lp.upper.copy(), -math.inf)
    may_dive = True
    incumbent_x = None
    incumbent_obj = math.inf
    nodes = 0
    trace = []
    stopped = None

    while True:
        if guard is not None and guard.expired():
            stopped = "time"
            break
        if node_limit is not None and nodes >= node_limit:
            stopped = "nodes"
            break
        if dive is not None:
            lower, upper, parent_bound = dive
            dive = None
        elif heap:
            parent_bound, _, lower, upper = heapq.heappop(heap)
            if parent_bound >= incumbent_obj - _prune_gap(incumbent_obj):
                heap.clear()
                continue
        else:
            break

        nodes += 1
        sol = solve_lp(p.lp.with_bounds(lower, upper))
        if sol.status is LpStatus.UNBOUNDED:
            raise MalformedProblem("MIP relaxation is unbounded")
        branched = False
        if sol.optimal:
            node_bound = max(sol.objective, parent_bound)
            if node_bound < incumbent_obj - _prune_gap(incumbent_obj):
                values = sol.x[integer]
                frac = values - np.floor(values)
                fractional = np.minimum(frac, 1.0 - frac) > INT_TOL
                if not fractional.any():
                    incumbent_x = sol.x.copy()
                    incumbent_x[integer] = np.round(values)
                    incumbent_obj = sol.objective
                    logger.debug("Node %d: incumbent %.9g", nodes, incumbent_obj)
                    if cutoff is not None and incumbent_obj < cutoff:
                        stopped = "cutoff"
                else:
                    score = np.where(fractional, np.abs(frac - 0.5), np.inf)
                    pick = int(np.argmin(score))
                    k = int(integer[pick])
                    v = sol.x[k]
                    down_upper = upper.copy()
                    down_upper[k] = math.floor(v)
                    up_lower = lower.copy()
                    up_lower[k] = math.ceil(v)
                    down = (lower, down_upper, node_bound)
                    up = (up_lower, upper, node_bound)
                    if may_dive:
                        near, far = (down, up) if v - math.floor(v) < 0.5 else (up, down)
                        dive = near
                        heapq.heappush(heap, (far[2], next(counter), far[0], far[1]))
                    else:
                        for child in (down, up):
                            heapq.heappush(heap, (child[2], next(counter), child[0], child[1]))
                    branched = True
        if not branched:
            may_dive = False
        trace.append(_open_bound(heap, dive, incumbent_obj, trace))
        if stopped == "cutoff":
            break

    if stopped is None:
        status = MipStatus.OPTIMAL if incumbent_x is not None else MipStatus.INFEASIBLE
    elif stopped == "cutoff":
        status = MipStatus.FEASIBLE
    else:
        status = MipStatus.FEASIBLE if incumbent_x is not None else MipStatus.TIME_LIMIT
        logger.warning("Branch-and-bound stopped by %s limit after %d node(s)", stopped, nodes)

    if status is MipStatus.OPTIMAL:
        best_bound = incumbent_obj
    elif status is MipStatus.INFEASIBLE:
        best_bound = math.inf
    else:
        best_bound = min(_open_bound(heap, dive, incumbent_obj, ()), incumbent_obj)

    if incumbent_x is not None:
        incumbent_x, incumbent_obj = _polish(p, incumbent_x, incumbent_obj)
    return MipSolution(
        status=status,
        x=incumbent_x,
        objective=incumbent_obj if incumbent_x is not None else None,
        best_bound=best_bound,
        nodes=nodes,
        bound_trace=tuple(trace),
    )


def _open_bound(heap, dive, incumbent_obj, trace):
    bound = incumbent_obj
    if heap:
        bound = min(bound, heap[0][0])
    if dive is not None:
        bound = min(bound, dive[2])
    if trace:
        bound = max(bound, trace[-1])
    return bound


def _polish(p, x, objective):
    """Re-solve the continuous remainder with integers fixed at their rounded values."""
    if not p.integer:
        return x, objective
    lower = p.lp.lower.copy()
    upper = p.lp.upper.copy()
    fixed = np.round(x[list(p.integer)])
    lower[list(p.integer)] = fixed
    upper[list(p.integer)] = fixed
    try:
        sol = solve_lp(p.lp.with_bounds(lower, upper))
    except NumericalBreakdown as exc:
        logger.warning("Polish LP failed, keeping search values: %s", exc)
        return x, objective
    if not sol.optimal:
        logger.warning("Polish LP returned %s, keeping search values", sol.status.value)
        return x, objective
    polished = sol.x.copy()
    polished[list(p.integer)] = fixed
    return polished, sol.objective
