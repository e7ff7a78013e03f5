"""Instance and solution data model shared by every solver.

Flows keep their external (input) order on the Instance; solvers work on
internal indices, which sort flows ascending by deadline (stable, with
unbounded deadlines last). Rate vectors and schedules are indexed
internally.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from numbers import Real

from ifdp.errors import EmptyFlows, MalformedInstance


UNBOUNDED = math.inf
DEMAND_RTOL = 1e-6
TIME_TOL = 1e-9
RATE_TOL = 1e-9
ROUTE_TOL = 1e-7
CAPACITY_RTOL = 1e-12


class SolveStatus(str, Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    TIME_LIMIT = "TimeLimit"
    NO_SOLUTION = "NoSolution"


@dataclass(frozen=True)
class Arc:
    tail: int
    head: int
    capacity: float


@dataclass(frozen=True)
class Network:
    node_count: int
    arcs: tuple
    units: tuple

    @cached_property
    def arc_index(self):
        """Map (tail, head) to the arc's position in arcs."""
        return {(a.tail, a.head): k for k, a in enumerate(self.arcs)}

    def max_units(self, arc, unit_index):
        """Upper bound floor(c / u_m) on the count of unit m on an arc."""
        cap = self.arcs[arc].capacity
        return int(math.floor(cap / self.units[unit_index] + 1e-9))

    def usable_capacity(self, arc):
        """Largest sum of whole units that fits into the arc's capacity."""
        return max(achievable_capacities(self.arcs[arc].capacity, self.units))


def achievable_capacities(capacity, units):
    """Return {value: unit counts} for every sum of whole units not exceeding capacity."""
    values = {0.0: tuple(0 for _ in units)}

    def extend(m, used, counts):
        if m == len(units):
            key = round(used, 12)
            if key not in values:
                values[key] = tuple(counts)
            return
        most = int(math.floor((capacity - used) / units[m] + 1e-9))
        for n in range(max(most, 0) + 1):
            extend(m + 1, used + n * units[m], counts + [n])

    extend(0, 0.0, [])
    return dict(sorted(values.items()))


@dataclass(frozen=True)
class Flow:
    origin: int
    destination: int
    size: float
    deadline: float = UNBOUNDED

    @property
    def bounded(self):
        return math.isfinite(self.deadline)


@dataclass(frozen=True)
class Instance:
    network: Network
    flows: tuple
    deadline_order: tuple

    @cached_property
    def internal_to_external(self):
        order = [0] * len(self.deadline_order)
        for external, internal in enumerate(self.deadline_order):
            order[internal] = external
        return tuple(order)

    @cached_property
    def ordered(self):
        """Flows in internal (deadline-sorted) order."""
        return tuple(self.flows[e] for e in self.internal_to_external)

    @property
    def flow_count(self):
        return len(self.flows)

    def flow(self, f):
        return self.ordered[f]

    def external_index(self, f):
        return self.internal_to_external[f]

    def external_flows(self):
        """Flows in input order."""
        return self.flows

    def earliest_completion(self, f):
        from ifdp.formulation import earliest_completion

        return earliest_completion(self, f)

    def sizes(self):
        return tuple(fl.size for fl in self.ordered)

    def deadlines(self):
        return tuple(fl.deadline for fl in self.ordered)

    def replace_flow(self, f, **changes):
        """Return a renormalized instance with internal flow f changed."""
        external = self.internal_to_external[f]
        flows = list(self.flows)
        current = flows[external]
        flows[external] = Flow(
            origin=changes.get("origin", current.origin),
            destination=changes.get("destination", current.destination),
            size=changes.get("size", current.size),
            deadline=changes.get("deadline", current.deadline),
        )
        return normalize(self.network, flows)

    def with_deadlines(self, deadlines):
        """Return a renormalized instance with new deadlines given in internal order."""
        flows = list(self.flows)
        for f, t in enumerate(deadlines):
            e = self.internal_to_external[f]
            fl = flows[e]
            flows[e] = Flow(fl.origin, fl.destination, fl.size, UNBOUNDED if t is None else t)
        return normalize(self.network, flows)


def normalize(network, flows):
    """Build an Instance with the stable deadline order."""
    flows = tuple(flows)
    ranked = sorted(range(len(flows)), key=lambda e: flows[e].deadline)
    deadline_order = [0] * len(flows)
    for internal, external in enumerate(ranked):
        deadline_order[external] = internal
    return Instance(network=network, flows=flows, deadline_order=tuple(deadline_order))


@dataclass(frozen=True)
class RateVector:
    """End-to-end rates per internal flow plus the allocation witnessing them.

    allocation entries are (flow, arc, unit_index, count); arc_rates entries
    are (flow, arc, rate). Both are sparse: absent entries are zero.
    """

    rates: tuple
    allocation: tuple = ()
    arc_rates: tuple = ()

    @property
    def first_positive(self):
        for f, r in enumerate(self.rates):
            if r > RATE_TOL:
                return f
        return None

    def is_zero(self):
        return self.first_positive is None

    def positive_flows(self):
        return tuple(f for f, r in enumerate(self.rates) if r > RATE_TOL)

    def same_rates(self, other, tol=1e-9):
        return len(self.rates) == len(other.rates) and all(
            abs(a - b) <= tol for a, b in zip(self.rates, other.rates)
        )

    def dominated_by(self, other, tol=1e-9):
        return all(a <= b + tol for a, b in zip(self.rates, other.rates))

    def restricted(self, keep):
        """Return the vector with every flow outside keep set to zero."""
        keep = set(keep)
        return RateVector(
            rates=tuple(r if f in keep else 0.0 for f, r in enumerate(self.rates)),
            allocation=tuple(e for e in self.allocation if e[0] in keep),
            arc_rates=tuple(e for e in self.arc_rates if e[0] in keep),
        )

    @classmethod
    def zero(cls, flow_count):
        return cls(rates=tuple(0.0 for _ in range(flow_count)))


@dataclass(frozen=True)
class Segment:
    vector: RateVector
    duration: float


@dataclass(frozen=True)
class Schedule:
    segments: tuple = ()

    @property
    def completion(self):
        return math.fsum(s.duration for s in self.segments)

    @classmethod
    def from_pairs(cls, pairs):
        return cls(tuple(Segment(v, float(x)) for v, x in pairs))


@dataclass(frozen=True)
class ScheduleEvaluation:
    completion: float
    delivered: tuple
    finish: tuple
    feasible: bool
    violations: tuple


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one solver call. Times are seconds of wall clock."""

    solver: str
    status: SolveStatus
    objective: float | None = None
    lower_bound: float | None = None
    iterations: int = 0
    wall_time: float = 0.0
    phase1_time: float | None = None
    phase2_time: float | None = None
    phase1_iterations: int | None = None
    phase2_iterations: int | None = None
    helper_time: float | None = None
    nodes: int = 0
    detail: str = ""
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.objective is not None and self.lower_bound is not None:
            if self.objective < self.lower_bound - 1e-6:
                raise ValueError(
                    f"Objective {self.objective} below lower bound {self.lower_bound}"
                )

    @property
    def solved(self):
        return self.status in (SolveStatus.OPTIMAL, SolveStatus.FEASIBLE)

    def to_text(self):
        lines = [
            f"solver: {self.solver}",
            f"status: {self.status.value}",
            f"objective: {_fmt(self.objective)}",
            f"lower_bound: {_fmt(self.lower_bound)}",
            f"iterations: {self.iterations}",
            f"wall_time: {self.wall_time:.6f}",
        ]
        for name in ("phase1_time", "phase2_time", "phase1_iterations", "phase2_iterations", "helper_time"):
            value = getattr(self, name)
            if value is not None:
                lines.append(f"{name}: {_fmt(value)}")
        if self.nodes:
            lines.append(f"nodes: {self.nodes}")
        if self.detail:
            lines.append(f"detail: {self.detail}")
        return "\n".join(lines)


def _fmt(value):
    if value is None:
        return "-"
    if isinstance(value, int):
        return str(value)
    return f"{value:.12g}"


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value):
    return isinstance(value, Real) and not isinstance(value, bool)


def validate_instance(raw) -> Instance:
    """Check raw input (an Instance or a mapping in the file schema) and normalize it.

    Every violated invariant is collected before raising MalformedInstance.
    """
    if isinstance(raw, Instance):
        raw = {
            "nodes": raw.network.node_count,
            "arcs": [{"i": a.tail, "j": a.head, "cap": a.capacity} for a in raw.network.arcs],
            "units": list(raw.network.units),
            "flows": [
                {
                    "origin": fl.origin,
                    "destination": fl.destination,
                    "size": fl.size,
                    "deadline": fl.deadline if fl.bounded else None,
                }
                for fl in raw.flows
            ],
        }
    if not isinstance(raw, Mapping):
        raise MalformedInstance([f"expected a mapping or Instance, got {type(raw).__name__}"])

    problems = []
    nodes = raw.get("nodes")
    if not _is_int(nodes) or nodes <= 0:
        problems.append(f"nodes must be a positive integer, got {nodes!r}")
        nodes = None

    units = raw.get("units")
    clean_units = []
    if not isinstance(units, (list, tuple)) or not units:
        problems.append("units must be a nonempty list")
    else:
        for k, u in enumerate(units):
            if not _is_number(u) or not math.isfinite(u) or u <= 0:
                problems.append(f"units[{k}] must be a positive number, got {u!r}")
            else:
                clean_units.append(float(u))
        if len(set(clean_units)) != len(clean_units):
            problems.append(f"units contain duplicates: {sorted(clean_units)}")

    arcs = raw.get("arcs", [])
    clean_arcs = []
    seen = set()
    if not isinstance(arcs, (list, tuple)):
        problems.append("arcs must be a list")
        arcs = []
    for k, arc in enumerate(arcs):
        if not isinstance(arc, Mapping):
            problems.append(f"arcs[{k}] must be a mapping")
            continue
        i, j, cap = arc.get("i"), arc.get("j"), arc.get("cap")
        ok = True
        for name, node in (("i", i), ("j", j)):
            if not _is_int(node) or (nodes is not None and not 0 <= node < nodes):
                problems.append(f"arcs[{k}].{name} is not a valid node id: {node!r}")
                ok = False
        if ok and i == j:
            problems.append(f"arcs[{k}] is a self-loop on node {i}")
            ok = False
        if not _is_number(cap) or not math.isfinite(cap) or cap < 0:
            problems.append(f"arcs[{k}].cap must be a finite number >= 0, got {cap!r}")
            ok = False
        if ok and (i, j) in seen:
            problems.append(f"arcs[{k}] duplicates arc ({i},{j})")
            ok = False
        if ok:
            seen.add((i, j))
            clean_arcs.append(Arc(i, j, float(cap)))

    flows = raw.get("flows", [])
    clean_flows = []
    if not isinstance(flows, (list, tuple)):
        problems.append("flows must be a list")
        flows = []
    for k, fl in enumerate(flows):
        if not isinstance(fl, Mapping):
            problems.append(f"flows[{k}] must be a mapping")
            continue
        o, d = fl.get("origin"), fl.get("destination")
        size, deadline = fl.get("size"), fl.get("deadline")
        ok = True
        for name, node in (("origin", o), ("destination", d)):
            if not _is_int(node) or (nodes is not None and not 0 <= node < nodes):
                problems.append(f"flows[{k}].{name} is not a valid node id: {node!r}")
                ok = False
        if ok and o == d:
            problems.append(f"flows[{k}] has origin equal to destination ({o})")
            ok = False
        if not _is_number(size) or not math.isfinite(size) or size <= 0:
            problems.append(f"flows[{k}].size must be a positive number, got {size!r}")
            ok = False
        if deadline is None or (_is_number(deadline) and deadline == math.inf):
            deadline = UNBOUNDED
        elif not _is_number(deadline) or not math.isfinite(deadline) or deadline <= 0:
            problems.append(f"flows[{k}].deadline must be positive or null, got {deadline!r}")
            ok = False
        if ok:
            clean_flows.append(Flow(o, d, float(size), float(deadline)))

    if problems:
        raise MalformedInstance(problems)
    if not flows:
        raise EmptyFlows("Instance has no flows")
    network = Network(node_count=nodes, arcs=tuple(clean_arcs), units=tuple(sorted(clean_units)))
    return normalize(network, clean_flows)


def check_rate_vector(inst: Instance, vector: RateVector, integral=True):
    """Return a list of violated rate-vector invariants (empty when valid)."""
    network = inst.network
    problems = []
    F = inst.flow_count
    if len(vector.rates) != F:
        return [f"rate vector has {len(vector.rates)} entries for {F} flows"]
    for f, r in enumerate(vector.rates):
        if not math.isfinite(r) or r < -RATE_TOL:
            problems.append(f"flow {f}: invalid rate {r!r}")

    used = [0.0] * len(network.arcs)
    offered = {}
    for f, a, m, count in vector.allocation:
        if not (0 <= f < F and 0 <= a < len(network.arcs) and 0 <= m < len(network.units)):
            problems.append(f"allocation entry ({f},{a},{m}) out of range")
            continue
        if count < 0 or (integral and count != int(round(count))):
            problems.append(f"allocation count {count!r} for flow {f} on arc {a} is not a nonnegative integer")
            continue
        used[a] += network.units[m] * count
        offered[(f, a)] = offered.get((f, a), 0.0) + network.units[m] * count
    for a, total in enumerate(used):
        cap = network.arcs[a].capacity
        if total > cap * (1 + CAPACITY_RTOL) + CAPACITY_RTOL:
            arc = network.arcs[a]
            problems.append(f"arc ({arc.tail},{arc.head}) allocated {total:g} > capacity {cap:g}")

    balance = {}
    for f, a, y in vector.arc_rates:
        if not (0 <= f < F and 0 <= a < len(network.arcs)):
            problems.append(f"arc rate entry ({f},{a}) out of range")
            continue
        if y < -ROUTE_TOL:
            problems.append(f"flow {f}: negative arc rate {y!r} on arc {a}")
        if y > offered.get((f, a), 0.0) + ROUTE_TOL * max(1.0, y):
            arc = network.arcs[a]
            problems.append(
                f"flow {f}: rate {y:g} on arc ({arc.tail},{arc.head}) exceeds its allocation "
                f"{offered.get((f, a), 0.0):g}"
            )
        arc = network.arcs[a]
        balance[(f, arc.tail)] = balance.get((f, arc.tail), 0.0) + y
        balance[(f, arc.head)] = balance.get((f, arc.head), 0.0) - y
    for f, r in enumerate(vector.rates):
        fl = inst.flow(f)
        balance[(f, fl.origin)] = balance.get((f, fl.origin), 0.0) - r
        balance[(f, fl.destination)] = balance.get((f, fl.destination), 0.0) + r
    for (f, node), excess in sorted(balance.items()):
        if abs(excess) > ROUTE_TOL * max(1.0, vector.rates[f]):
            problems.append(f"flow {f}: conservation off by {excess:.3e} at node {node}")
    return problems


def evaluate_schedule(inst: Instance, sched: Schedule, integral=True) -> ScheduleEvaluation:
    """Check a schedule against sizes, deadlines and every segment's vector."""
    F = inst.flow_count
    violations = []
    delivered = [0.0] * F
    finish = [None] * F
    clock = 0.0
    for k, seg in enumerate(sched.segments):
        if not math.isfinite(seg.duration) or seg.duration < 0:
            violations.append(f"segment {k}: invalid duration {seg.duration!r}")
            continue
        for problem in check_rate_vector(inst, seg.vector, integral=integral):
            violations.append(f"segment {k}: VectorInfeasible: {problem}")
        clock += seg.duration
        if len(seg.vector.rates) != F:
            continue
        for f, r in enumerate(seg.vector.rates):
            if r > RATE_TOL and seg.duration > 0:
                delivered[f] += r * seg.duration
                finish[f] = clock

    for f in range(F):
        fl = inst.flow(f)
        label = f"flow {f} (input #{inst.external_index(f)})"
        if abs(delivered[f] - fl.size) > DEMAND_RTOL * max(1.0, fl.size):
            violations.append(f"{label}: delivered {delivered[f]:.9g} of size {fl.size:.9g}")
        if finish[f] is not None and finish[f] > fl.deadline + TIME_TOL:
            violations.append(f"{label}: finishes at {finish[f]:.9g} after deadline {fl.deadline:.9g}")
    return ScheduleEvaluation(
        completion=math.fsum(s.duration for s in sched.segments),
        delivered=tuple(delivered),
        finish=tuple(finish),
        feasible=not violations,
        violations=tuple(violations),
    )
