"""Column generation for IFDP.

The restricted master problem (RMP) chooses how long each rate vector is
used; every flow's size row must be met and, for bounded deadlines, the
vectors whose first positive flow is at most f may run at most t_f in
total. Pricing solves the integer rate subproblem once per starting flow
f+, skipping ahead past the first flow that actually received rate.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ifdp.errors import InfeasibleState, NumericalBreakdown, SolveTimeout
from ifdp.formulation import add_rate_block, block_vector
from ifdp.guardrails import MAX_WORKERS, SolveGuard
from ifdp.lp_engine import EQ, GE, LE, LpProblem, ModelBuilder, solve_lp
from ifdp.mfa import solve_mfa
from ifdp.mip_engine import MipProblem, MipStatus, solve_mip
from ifdp.model import (
    DEMAND_RTOL,
    RATE_TOL,
    RateVector,
    Schedule,
    SolveReport,
    SolveStatus,
    evaluate_schedule,
)
from ifdp.tsa import rtsa_lower_bound


PRICING_TOL = 1e-7
DUPLICATE_TOL = 1e-9
ACTIVE_TOL = 1e-9
DUAL_SIGN_TOL = 1e-6

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Column:
    vector: RateVector
    first_positive: int

    @classmethod
    def from_vector(cls, vector: RateVector):
        q = vector.first_positive
        if q is None:
            raise ValueError("A column needs at least one positive rate")
        return cls(vector, q)


@dataclass(frozen=True, eq=False)
class Duals:
    """Size-row duals (lambda) and deadline-row duals (pi, zero for unbounded flows)."""

    size: np.ndarray
    deadline: np.ndarray

    @classmethod
    def of(cls, size, deadline=None):
        size = np.asarray(size, dtype=float)
        deadline = np.zeros_like(size) if deadline is None else np.asarray(deadline, dtype=float)
        return cls(size, deadline)


@dataclass(frozen=True, eq=False)
class RmpState:
    columns: tuple
    x: np.ndarray
    artificials: np.ndarray
    duals: Duals
    objective: float
    phase: int

    def residual(self):
        return float(self.artificials.sum())


@dataclass(frozen=True)
class SpResult:
    vector: RateVector
    f_plus_plus: int | None
    objective: float
    optimal: bool = True


@dataclass(frozen=True)
class PricingStep:
    f_plus: int
    f_plus_plus: int | None
    sp_objective: float
    reduced_cost: float
    duplicate: bool = False


@dataclass(frozen=True)
class PricingResult:
    best: Column | None
    reduced_cost: float
    negative: tuple
    trace: tuple


@dataclass
class CgaOptions:
    warm_start: Schedule | None = None
    gap_bound: tuple | None = None
    time_limit: float | None = None
    fast_pricing: bool = False
    pricing_workers: int = 1
    continuous: bool = False
    max_iterations: int = 10_000
    label: str = "cga"


@dataclass(frozen=True)
class Construction:
    schedule: Schedule
    checkpoints: tuple
    operations: int


@dataclass
class _Progress:
    columns: list = field(default_factory=list)
    objectives: list = field(default_factory=list)
    phase1_iterations: int = 0
    phase2_iterations: int = 0
    phase1_time: float = 0.0
    phase2_time: float = 0.0
    state: RmpState | None = None


def _bounded_flows(inst):
    return [f for f in range(inst.flow_count) if inst.flow(f).bounded]


def big_m(inst):
    """Artificial cost that dominates any achievable time per data unit."""
    return 1e4 * max(1.0, 1.0 / inst.network.units[0])


def build_rmp(inst, columns, phase=2, artificial_cost=None, covering=False) -> LpProblem:
    """The restricted master LP over columns.

    Variables are the column durations followed, when present, by one
    artificial per flow. Phase 1 prices artificials at 1 and columns at 0;
    phase 2 prices columns at 1 and includes artificials only when
    artificial_cost is given. covering turns the size rows into >= rows.
    """
    F = inst.flow_count
    builder = ModelBuilder()
    xs = [
        builder.add_var(f"x[{k}]", cost=1.0 if phase == 2 else 0.0)
        for k in range(len(columns))
    ]
    arts = []
    if phase == 1 or artificial_cost is not None:
        cost = 1.0 if phase == 1 else artificial_cost
        arts = [builder.add_var(f"a[{f}]", cost=cost) for f in range(F)]
    for f in range(F):
        row = {xs[k]: col.vector.rates[f] for k, col in enumerate(columns) if col.vector.rates[f] > 0}
        if arts:
            row[arts[f]] = 1.0
        builder.add_row(row, GE if covering else EQ, inst.flow(f).size, name=f"size[{f}]")
    for f in _bounded_flows(inst):
        row = {xs[k]: 1.0 for k, col in enumerate(columns) if col.first_positive <= f}
        builder.add_row(row, LE, inst.flow(f).deadline, name=f"deadline[{f}]")
    return builder.to_lp()


def solve_rmp(inst, columns, phase, artificial_cost=None, covering=False):
    lp = build_rmp(inst, columns, phase, artificial_cost, covering)
    sol = solve_lp(lp)
    if not sol.optimal:
        return None
    F = inst.flow_count
    n = len(columns)
    x = sol.x[:n]
    artificials = sol.x[n:n + F] if lp.num_vars > n else np.zeros(F)
    size_duals = sol.duals[:F]
    deadline_duals = np.zeros(F)
    for k, f in enumerate(_bounded_flows(inst)):
        deadline_duals[f] = sol.duals[F + k]
    if deadline_duals.max(initial=0.0) > DUAL_SIGN_TOL:
        raise NumericalBreakdown(f"Deadline dual {deadline_duals.max():.3e} has the wrong sign")
    deadline_duals = np.minimum(deadline_duals, 0.0)
    return RmpState(
        columns=tuple(columns),
        x=x,
        artificials=np.maximum(artificials, 0.0),
        duals=Duals(size_duals, deadline_duals),
        objective=sol.objective if phase == 1 or artificial_cost is None else float(x.sum()),
        phase=phase,
    )


def reduced_cost(vector: RateVector, duals: Duals, column_cost=1.0):
    """theta = c - sum_f r_f lambda_f - sum_{f >= q(v)} pi_f."""
    q = vector.first_positive
    if q is None:
        return column_cost
    rates = np.asarray(vector.rates)
    return float(column_cost - rates @ duals.size - duals.deadline[q:].sum())


def solve_sp(inst, duals: Duals, f_plus, column_cost=1.0, integral=True, cutoff=None, time_limit=None):
    """Price flows f_plus..F-1: maximize sum lambda_f r_f over one allocation.

    Flows with nonpositive lambda are left out; they cannot improve the
    objective and only consume capacity. Returns the vector, its first
    positive flow and the subproblem objective c - sum lambda_f r_f.
    """
    flows = [f for f in range(f_plus, inst.flow_count) if duals.size[f] > 1e-12]
    if not flows:
        return SpResult(RateVector.zero(inst.flow_count), None, column_cost)
    builder = ModelBuilder()
    block = add_rate_block(builder, inst, flows, integral=integral, tag=f"|{f_plus}")
    for f in flows:
        builder.set_cost(block.rate[f], -float(duals.size[f]))
    if not block.arc_rate:
        return SpResult(RateVector.zero(inst.flow_count), None, column_cost)
    mip_cutoff = None if cutoff is None else cutoff - column_cost
    sol = solve_mip(MipProblem.from_builder(builder), time_limit=time_limit, cutoff=mip_cutoff)
    if sol.status is MipStatus.TIME_LIMIT:
        raise SolveTimeout(f"Pricing subproblem for f+={f_plus} ran out of time")
    if sol.status is MipStatus.INFEASIBLE:
        raise NumericalBreakdown(f"Pricing subproblem for f+={f_plus} reported infeasible")
    vector = block_vector(inst, block, sol.x, integral=integral)
    objective = column_cost - float(np.asarray(vector.rates) @ duals.size)
    return SpResult(vector, vector.first_positive, objective, optimal=sol.status is MipStatus.OPTIMAL)


def _is_duplicate(vector, pool):
    return any(vector.same_rates(col.vector, DUPLICATE_TOL) for col in pool)


def price(
    inst,
    duals: Duals,
    column_cost=1.0,
    existing=(),
    exhaustive=False,
    fast=False,
    workers=1,
    integral=True,
    guard=None,
) -> PricingResult:
    """One pricing sweep over starting flows f+.

    Sequential sweeps jump from f+ to f++ + 1 after each solve; exhaustive
    or multi-worker sweeps solve every f+ and merge in f+ order.
    """
    F = inst.flow_count

    def solve(f_plus):
        cutoff = None
        if fast:
            cutoff = -PRICING_TOL + float(duals.deadline[f_plus:].sum())
        remaining = guard.remaining() if guard is not None else None
        if guard is not None:
            guard.check_timeout()
        return solve_sp(inst, duals, f_plus, column_cost, integral, cutoff, remaining)

    if exhaustive or workers > 1:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=min(workers, MAX_WORKERS, F)) as pool:
                results = list(pool.map(solve, range(F)))
        else:
            results = [solve(f_plus) for f_plus in range(F)]
        outcomes = list(enumerate(results))
    else:
        outcomes = []
        f_plus = 0
        while f_plus < F:
            res = solve(f_plus)
            outcomes.append((f_plus, res))
            if res.f_plus_plus is None:
                break
            f_plus = res.f_plus_plus + 1

    trace = []
    negative = []
    best = None
    best_theta = math.inf
    for f_plus, res in outcomes:
        if res.f_plus_plus is None:
            trace.append(PricingStep(f_plus, None, res.objective, column_cost))
            best_theta = min(best_theta, column_cost)
            continue
        theta = reduced_cost(res.vector, duals, column_cost)
        duplicate = _is_duplicate(res.vector, existing) or any(
            res.vector.same_rates(col.vector, DUPLICATE_TOL) for col, _ in negative
        )
        trace.append(PricingStep(f_plus, res.f_plus_plus, res.objective, theta, duplicate))
        if duplicate:
            best_theta = min(best_theta, max(theta, 0.0))
            continue
        best_theta = min(best_theta, theta)
        if theta < -PRICING_TOL:
            column = Column.from_vector(res.vector)
            negative.append((column, theta))
            if best is None or theta < best[1]:
                best = (column, theta)
    return PricingResult(
        best=best[0] if best else None,
        reduced_cost=best_theta,
        negative=tuple(negative),
        trace=tuple(trace),
    )


def construct_schedule_detailed(inst, state: RmpState) -> Construction:
    """Order the used columns by first positive flow and lay them out in time."""
    F = inst.flow_count
    for f in range(F):
        if state.artificials[f] > DEMAND_RTOL * max(1.0, inst.flow(f).size):
            raise InfeasibleState(
                f"Flow {f} still has {state.artificials[f]:.6g} undelivered in the master state"
            )
    buckets = [[] for _ in range(F)]
    operations = 0
    for k, col in enumerate(state.columns):
        if state.x[k] <= ACTIVE_TOL:
            continue
        q = None
        for f, r in enumerate(col.vector.rates):
            operations += 1
            if r > RATE_TOL:
                q = f
                break
        buckets[q].append(k)
    pairs = []
    checkpoints = []
    clock = 0.0
    for f in range(F):
        for k in buckets[f]:
            pairs.append((state.columns[k].vector, float(state.x[k])))
            clock += float(state.x[k])
        checkpoints.append(clock)
    return Construction(Schedule.from_pairs(pairs), tuple(checkpoints), operations)


def construct_schedule(inst, state: RmpState) -> Schedule:
    return construct_schedule_detailed(inst, state).schedule


def _columns_from_schedule(schedule):
    columns = []
    for seg in schedule.segments:
        if seg.vector.is_zero() or _is_duplicate(seg.vector, columns):
            continue
        columns.append(Column.from_vector(seg.vector))
    return columns


@dataclass(frozen=True)
class Phase1Result:
    feasible: bool
    state: RmpState
    iterations: int
    residual: float


def phase1(inst, options: CgaOptions | None = None, columns=(), guard=None) -> Phase1Result:
    """Minimize total artificial demand by column generation.

    feasible is False when the minimum exceeds 1e-6 of the total size; the
    final duals then certify infeasibility.
    """
    options = options or CgaOptions()
    guard = guard or SolveGuard(options.time_limit)
    columns = list(columns)
    total = math.fsum(inst.sizes())
    zero = 1e-9 * max(1.0, total)
    iterations = 0
    while True:
        guard.check_timeout()
        state = solve_rmp(inst, columns, phase=1)
        if state is None:
            raise NumericalBreakdown("Phase-I master problem is always feasible but the LP failed")
        iterations += 1
        logger.debug("phase I iteration %d: residual %.9g over %d column(s)", iterations, state.objective, len(columns))
        if state.objective <= zero:
            return Phase1Result(True, state, iterations, state.objective)
        pricing = price(
            inst, state.duals, column_cost=0.0, existing=columns,
            fast=options.fast_pricing, workers=options.pricing_workers,
            integral=not options.continuous, guard=guard,
        )
        if not pricing.negative:
            feasible = state.objective <= DEMAND_RTOL * total
            return Phase1Result(feasible, state, iterations, state.objective)
        columns.extend(col for col, _ in pricing.negative)
        if iterations >= options.max_iterations:
            raise SolveTimeout(f"Phase I hit the iteration limit ({options.max_iterations})")


def _gap_met(state, gap_bound):
    if gap_bound is None:
        return False
    lower, percent = gap_bound
    if lower is None or lower <= 0:
        return False
    return (state.objective - lower) / lower <= percent / 100.0 + 1e-12


def solve_cga(inst, options: CgaOptions | None = None):
    """Column generation to optimality (or the gap bound); returns (SolveReport, Schedule or None)."""
    options = options or CgaOptions()
    guard = SolveGuard(options.time_limit)
    progress = _Progress()
    integral = not options.continuous
    artificial_cost = None
    try:
        start = time.monotonic()
        columns = _columns_from_schedule(options.warm_start) if options.warm_start else []
        state = solve_rmp(inst, columns, phase=2) if columns else None
        if state is None:
            result = phase1(inst, options, columns, guard)
            progress.phase1_iterations = result.iterations
            columns = list(result.state.columns)
            if not result.feasible:
                progress.phase1_time = time.monotonic() - start
                logger.info("%s: infeasible, phase-I residual %.6g", options.label, result.residual)
                return _report(options, SolveStatus.INFEASIBLE, progress, guard, detail="phase-I residual"), None
            if result.residual > 1e-9 * max(1.0, math.fsum(inst.sizes())):
                artificial_cost = big_m(inst)
        progress.phase1_time = time.monotonic() - start
        progress.columns = columns

        start = time.monotonic()
        status = None
        while status is None:
            guard.check_timeout()
            # the warm-start master from above is already solved over these columns
            if state is None or progress.phase2_iterations:
                state = solve_rmp(inst, progress.columns, phase=2, artificial_cost=artificial_cost)
            if state is None:
                raise NumericalBreakdown("Phase-II master problem became infeasible")
            progress.state = state
            progress.objectives.append(state.objective)
            progress.phase2_iterations += 1
            logger.debug(
                "phase II iteration %d: objective %.9g over %d column(s)",
                progress.phase2_iterations, state.objective, len(progress.columns),
            )
            if _no_residual(inst, state) and _gap_met(state, options.gap_bound):
                status = SolveStatus.FEASIBLE
                break
            pricing = price(
                inst, state.duals, column_cost=1.0, existing=progress.columns,
                fast=options.fast_pricing, workers=options.pricing_workers,
                integral=integral, guard=guard,
            )
            if not pricing.negative:
                status = SolveStatus.OPTIMAL
                break
            progress.columns.extend(col for col, _ in pricing.negative)
            if progress.phase2_iterations >= options.max_iterations:
                raise SolveTimeout(f"Phase II hit the iteration limit ({options.max_iterations})")
        progress.phase2_time = time.monotonic() - start
    except SolveTimeout as exc:
        logger.warning("%s: %s", options.label, exc)
        progress.phase2_time = max(0.0, guard.elapsed() - progress.phase1_time)
        state = progress.state
        if state is not None and _no_residual(inst, state):
            schedule = _verified(inst, construct_schedule(inst, state), integral)
            return _report(options, SolveStatus.TIME_LIMIT, progress, guard, objective=state.objective), schedule
        return _report(options, SolveStatus.TIME_LIMIT, progress, guard), None

    schedule = _verified(inst, construct_schedule(inst, progress.state), integral)
    objective = progress.state.objective
    if status is SolveStatus.OPTIMAL:
        lower = objective
    else:
        lower = min(options.gap_bound[0], objective)
    logger.info("%s: %s objective %.9g", options.label, status.value, objective)
    return _report(options, status, progress, guard, objective=objective, lower_bound=lower), schedule


def _no_residual(inst, state):
    return all(
        state.artificials[f] <= DEMAND_RTOL * max(1.0, inst.flow(f).size)
        for f in range(inst.flow_count)
    )


def _verified(inst, schedule, integral):
    evaluation = evaluate_schedule(inst, schedule, integral=integral)
    if not evaluation.feasible:
        raise NumericalBreakdown(f"Constructed schedule failed evaluation: {evaluation.violations[0]}")
    return schedule


def _report(options, status, progress, guard, objective=None, lower_bound=None, detail=""):
    return SolveReport(
        solver=options.label,
        status=status,
        objective=objective,
        lower_bound=lower_bound,
        iterations=progress.phase1_iterations + progress.phase2_iterations,
        wall_time=guard.elapsed(),
        phase1_time=progress.phase1_time,
        phase2_time=progress.phase2_time,
        phase1_iterations=progress.phase1_iterations,
        phase2_iterations=progress.phase2_iterations,
        detail=detail,
        extra={"objectives": tuple(progress.objectives), "columns": len(progress.columns)},
    )


def _hybrid(inst, label, warm_mfa, gap, time_limit, **options):
    guard = SolveGuard(time_limit)
    helper = 0.0
    warm_start = None
    lower = None
    if warm_mfa:
        mfa_report, mfa_schedule = solve_mfa(inst, time_limit=guard.remaining())
        helper += mfa_report.wall_time
        warm_start = mfa_schedule if mfa_report.solved else None
        logger.info("%s: MFA warm start %s", label, mfa_report.status.value)
    if gap is not None:
        start = time.monotonic()
        try:
            lower = rtsa_lower_bound(inst, time_limit=guard.remaining())
        except SolveTimeout:
            return SolveReport(label, SolveStatus.TIME_LIMIT, wall_time=guard.elapsed(), helper_time=helper), None
        helper += time.monotonic() - start
    cga_options = CgaOptions(
        warm_start=warm_start,
        gap_bound=(lower, gap) if gap is not None else None,
        time_limit=guard.remaining(),
        label=label,
        **options,
    )
    report, schedule = solve_cga(inst, cga_options)
    return dataclasses.replace(report, wall_time=guard.elapsed(), helper_time=helper), schedule


def solve_mfa_cga(inst, time_limit=None, **options):
    """CGA warm-started from the MFA schedule; falls back to phase I when MFA fails."""
    return _hybrid(inst, "mfa-cga", True, None, time_limit, **options)


def solve_rtsa_cga(inst, p, time_limit=None, **options):
    """CGA stopped once within p percent of the single-slice lower bound."""
    return _hybrid(inst, f"rtsa-cga({p:g})", False, p, time_limit, **options)


def solve_mfa_rtsa_cga(inst, p, time_limit=None, **options):
    return _hybrid(inst, f"mfa-rtsa-cga({p:g})", True, p, time_limit, **options)
