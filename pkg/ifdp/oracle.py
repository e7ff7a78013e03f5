"""Exact reference solvers for small instances.

solve_full_mp enumerates every maximal rate vector and solves the master
LP over all of them at once. solve_edf_bottleneck schedules flows one at a
time in deadline order when a single arc bottlenecks all of them.
continuous_mode runs column generation with fractional capacity units.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from functools import reduce

from ifdp.cga import CgaOptions, Column, construct_schedule, solve_cga, solve_rmp
from ifdp.errors import NumericalBreakdown, PremiseViolated, TooLarge
from ifdp.formulation import max_single_flow_rate, max_single_flow_vector
from ifdp.graphs import max_flow_value, relevant_arcs, route_flow, separating_arcs, usable_arcs
from ifdp.guardrails import MAX_ORACLE_ALLOCATIONS, SolveGuard
from ifdp.model import (
    RATE_TOL,
    TIME_TOL,
    RateVector,
    Schedule,
    Segment,
    SolveReport,
    SolveStatus,
    achievable_capacities,
    evaluate_schedule,
)


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OracleCaps:
    max_nodes: int = 5
    max_flows: int = 4
    max_total_units: int = 12
    max_allocations: int = MAX_ORACLE_ALLOCATIONS


def _check_caps(inst, caps):
    network = inst.network
    total_units = sum(network.max_units(a, 0) for a in range(len(network.arcs)))
    if network.node_count > caps.max_nodes:
        raise TooLarge(f"{network.node_count} nodes exceed the oracle cap of {caps.max_nodes}")
    if inst.flow_count > caps.max_flows:
        raise TooLarge(f"{inst.flow_count} flows exceed the oracle cap of {caps.max_flows}")
    if total_units > caps.max_total_units:
        raise TooLarge(f"{total_units} capacity units exceed the oracle cap of {caps.max_total_units}")


def _first_positive(rates):
    return next(f for f, r in enumerate(rates) if r > RATE_TOL)


def _arc_options(inst, a, flows):
    """Maximal ways to split arc a's capacity among flows, as per-flow capacity values."""
    network = inst.network
    cap = network.arcs[a].capacity
    values = achievable_capacities(cap, network.units)
    smallest = network.units[0]
    options = []
    for shares in itertools.product(values, repeat=len(flows)):
        used = math.fsum(shares)
        if used > cap + 1e-9 or cap - used >= smallest - 1e-9:
            continue
        options.append(tuple(zip(flows, shares)))
    return options, values


def enumerate_rate_vectors(inst, caps: OracleCaps | None = None):
    """Every nondominated rate vector reachable by an integer allocation."""
    caps = caps or OracleCaps()
    _check_caps(inst, caps)
    network = inst.network
    F = inst.flow_count
    per_arc = []
    unit_counts = {}
    for a in usable_arcs(network):
        flows = [f for f in range(F) if a in relevant_arcs(inst, f)]
        if not flows:
            continue
        options, values = _arc_options(inst, a, flows)
        unit_counts[a] = values
        per_arc.append((a, options))
    combinations = reduce(lambda acc, item: acc * len(item[1]), per_arc, 1)
    if combinations > caps.max_allocations:
        raise TooLarge(f"{combinations} allocations exceed the oracle cap of {caps.max_allocations}")
    logger.debug("oracle: enumerating %d allocation(s) over %d arc(s)", combinations, len(per_arc))

    cache = {}

    def flow_rate(f, capacities):
        key = (f, capacities)
        if key not in cache:
            fl = inst.flow(f)
            cache[key] = max_flow_value(network, fl.origin, fl.destination, dict(capacities))
        return cache[key]

    found = {}
    for choice in itertools.product(*(options for _, options in per_arc)):
        shares = [[] for _ in range(F)]
        for (a, _), split in zip(per_arc, choice):
            for f, value in split:
                if value > 0:
                    shares[f].append((a, value))
        rates = tuple(round(flow_rate(f, tuple(shares[f])), 12) for f in range(F))
        if any(r > RATE_TOL for r in rates) and rates not in found:
            found[rates] = shares

    # a vector with an earlier first positive flow counts against more
    # deadline rows, so dominance only prunes within one first-positive class
    lead = {r: _first_positive(r) for r in found}
    maximal = [
        r for r in found
        if not any(
            other != r and lead[other] == lead[r] and all(a <= b + 1e-9 for a, b in zip(r, other))
            for other in found
        )
    ]
    vectors = []
    for rates in sorted(maximal, reverse=True):
        shares = found[rates]
        allocation = []
        arc_rates = []
        for f, r in enumerate(rates):
            if r <= RATE_TOL:
                continue
            for a, value in shares[f]:
                counts = unit_counts[a][value]
                allocation.extend((f, a, m, n) for m, n in enumerate(counts) if n > 0)
            fl = inst.flow(f)
            routed = route_flow(network, fl.origin, fl.destination, dict(shares[f]), r)
            if routed is None:
                raise NumericalBreakdown(f"Flow {f} cannot route its own max-flow rate {r}")
            arc_rates.extend((f, a, y) for a, y in sorted(routed.items()))
        vectors.append(RateVector(
            tuple(float(r) if r > RATE_TOL else 0.0 for r in rates),
            tuple(sorted(allocation)),
            tuple(arc_rates),
        ))
    return vectors


def trim_schedule(inst, schedule: Schedule) -> Schedule:
    """Cut over-delivery: each flow keeps its earliest data up to its size."""
    need = list(inst.sizes())
    segments = []
    for seg in schedule.segments:
        rates = list(seg.vector.rates)
        scale = {}
        for f, r in enumerate(rates):
            if r <= RATE_TOL or seg.duration <= 0:
                continue
            delivered = min(r * seg.duration, need[f])
            need[f] -= delivered
            if need[f] <= 1e-12 * max(1.0, inst.flow(f).size):
                need[f] = 0.0
            rates[f] = delivered / seg.duration if delivered > 0 else 0.0
            if rates[f] <= RATE_TOL:
                rates[f] = 0.0
            scale[f] = rates[f] / r
        vector = RateVector(
            tuple(rates),
            tuple(e for e in seg.vector.allocation if rates[e[0]] > 0),
            tuple((f, a, y * scale[f]) for f, a, y in seg.vector.arc_rates if rates[f] > 0),
        )
        segments.append(Segment(vector, seg.duration))
    return Schedule(tuple(segments))


def solve_full_mp(inst, caps: OracleCaps | None = None):
    """Master LP over all enumerated vectors; returns (SolveReport, Schedule or None)."""
    guard = SolveGuard(None)
    vectors = enumerate_rate_vectors(inst, caps)
    columns = [Column.from_vector(v) for v in vectors]
    state = solve_rmp(inst, columns, phase=2, covering=True)
    if state is None:
        logger.info("oracle: infeasible over %d vector(s)", len(columns))
        return SolveReport("oracle", SolveStatus.INFEASIBLE, wall_time=guard.elapsed(),
                           extra={"vectors": len(columns)}), None
    schedule = trim_schedule(inst, construct_schedule(inst, state))
    evaluation = evaluate_schedule(inst, schedule)
    if not evaluation.feasible:
        raise NumericalBreakdown(f"Oracle schedule failed evaluation: {evaluation.violations[0]}")
    report = SolveReport(
        "oracle", SolveStatus.OPTIMAL,
        objective=state.objective, lower_bound=state.objective,
        iterations=1, wall_time=guard.elapsed(), extra={"vectors": len(columns)},
    )
    logger.info("oracle: optimal %.9g over %d vector(s)", state.objective, len(columns))
    return report, schedule


def bottleneck_arcs(inst):
    """Usable arcs that separate every flow's origin from its destination."""
    cuts = [
        separating_arcs(inst.network, fl.origin, fl.destination)
        for fl in inst.ordered
    ]
    return set.intersection(*cuts) if cuts else set()


def solve_edf_bottleneck(inst):
    """Earliest-deadline-first sequential schedule on a shared bottleneck arc."""
    guard = SolveGuard(None)
    common = bottleneck_arcs(inst)
    if not common:
        raise PremiseViolated("No single arc lies on every flow's paths")
    network = inst.network
    for f in range(inst.flow_count):
        rate = max_single_flow_rate(inst, f)
        if not any(abs(rate - network.usable_capacity(a)) <= 1e-9 for a in common):
            raise PremiseViolated(
                f"Flow {f} reaches rate {rate:g}, below every shared arc's usable capacity"
            )

    pairs = []
    clock = 0.0
    for f in range(inst.flow_count):
        vector = max_single_flow_vector(inst, f)
        duration = inst.flow(f).size / vector.rates[f]
        clock += duration
        pairs.append((vector, duration))
        if clock > inst.flow(f).deadline + TIME_TOL:
            logger.info("edf: flow %d finishes at %.9g after deadline %.9g", f, clock, inst.flow(f).deadline)
            report = SolveReport(
                "edf", SolveStatus.INFEASIBLE, wall_time=guard.elapsed(),
                detail=f"flow {f} (input #{inst.external_index(f)}) misses its deadline",
            )
            return report, None
    schedule = Schedule.from_pairs(pairs)
    report = SolveReport(
        "edf", SolveStatus.OPTIMAL, objective=schedule.completion,
        lower_bound=schedule.completion, iterations=inst.flow_count, wall_time=guard.elapsed(),
    )
    return report, schedule


def continuous_mode(inst, time_limit=None):
    """Column generation with fractional unit counts."""
    return solve_cga(inst, CgaOptions(continuous=True, time_limit=time_limit, label="continuous"))
