"""Scenario generation and the benchmark runner.

A Scenario names a topology, a flow count and a deadline rule; every seed
of a scenario yields one instance. run_benchmark solves each instance with
every requested solver plus a plain CGA reference and aggregates failure
rates, optimality gaps, times and hybrid time reductions per
(scenario, solver) cell.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace

import numpy as np

from ifdp.cga import CgaOptions, phase1, solve_cga, solve_mfa_cga, solve_mfa_rtsa_cga, solve_rtsa_cga
from ifdp.errors import Disconnected, IfdpError, NeverFeasible, ParseError
from ifdp.formulation import earliest_completion
from ifdp.graphs import reachable
from ifdp.guardrails import MAX_WORKERS, SessionGuard
from ifdp.mfa import solve_mfa
from ifdp.model import UNBOUNDED, Flow, SolveStatus, normalize
from ifdp.oracle import continuous_mode, solve_edf_bottleneck, solve_full_mp
from ifdp.topologies import get_by_name
from ifdp.tsa import solve_tsa


VARIANTS = ("fixed", "tight", "moderate")
MODERATE_FACTOR = 1.3
ALPHA_MAX = 4.0
ALPHA_TOL = 0.05
RESAMPLE_LIMIT = 100
DEFAULT_GAP_SWEEP = (5, 10, 15, 20)

CSV_FIELDS = (
    "scenario", "solver", "instances", "failure_pct", "infeasible_pct", "timeout_pct",
    "gap_pct", "time_s", "phase1_s", "phase2_s", "reduction_pct",
)
PLOT_FIELDS = ("series", "topology", "solver", "x", "y")

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scenario:
    topology: str
    flow_count: int
    alpha: float | None = None
    variant: str = "fixed"
    capacity: float | None = None
    units: tuple | None = None
    size_range: tuple = (1, 100)
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.flow_count < 1:
            raise ValueError(f"flow_count must be >= 1, got {self.flow_count}")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        lo, hi = self.size_range
        if not 0 < lo <= hi:
            raise ValueError(f"size_range must satisfy 0 < low <= high, got {self.size_range}")
        get_by_name(self.topology)

    @property
    def name(self):
        rule = f"a{self.alpha:g}" if self.variant == "fixed" and self.alpha is not None else self.variant
        return f"{self.topology}-F{self.flow_count}-{rule}"


def _base_instance(sc: Scenario):
    """The scenario's flows with unbounded deadlines."""
    topology = get_by_name(sc.topology)
    if topology.flows and sc.flow_count == len(topology.flows) and sc.capacity is None and sc.units is None:
        return topology.example_instance().with_deadlines([None] * sc.flow_count)
    network = topology.network(sc.capacity, sc.units)
    rng = np.random.default_rng(sc.seed)
    lo, hi = sc.size_range
    integral_sizes = float(lo).is_integer() and float(hi).is_integer()
    flows = []
    for f in range(sc.flow_count):
        for _ in range(RESAMPLE_LIMIT):
            o, d = (int(v) for v in rng.choice(network.node_count, size=2, replace=False))
            if reachable(network, o, d):
                break
        else:
            raise Disconnected(
                f"No connected origin/destination pair for flow {f} after {RESAMPLE_LIMIT} draws"
            )
        size = float(rng.integers(int(lo), int(hi) + 1)) if integral_sizes else float(rng.uniform(lo, hi))
        flows.append(Flow(o, d, size, UNBOUNDED))
    return normalize(network, flows)


def _with_alpha(base, alpha):
    """Deadlines alpha * e_f; base has unbounded deadlines so internal order equals input order."""
    return base.with_deadlines([alpha * earliest_completion(base, f) for f in range(base.flow_count)])


def tight_alpha(sc: Scenario, hi=ALPHA_MAX, tol=ALPHA_TOL):
    """Smallest alpha (within tol) whose instance passes column-generation phase I."""
    base = _base_instance(sc)

    def feasible(alpha):
        return phase1(_with_alpha(base, alpha)).feasible

    if feasible(1.0):
        return 1.0
    if not feasible(hi):
        raise NeverFeasible(f"{sc.name} seed {sc.seed} is infeasible even at alpha={hi:g}")
    lo = 1.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    logger.info("%s seed %d: tight alpha %.4g", sc.name, sc.seed, hi)
    return hi


def scenario_alpha(sc: Scenario):
    if sc.variant == "tight":
        return tight_alpha(sc)
    if sc.variant == "moderate":
        return MODERATE_FACTOR * tight_alpha(sc)
    return sc.alpha


def generate_instance(sc: Scenario):
    """Deterministic instance for sc; example topologies with their own flows and no alpha are returned as-is."""
    topology = get_by_name(sc.topology)
    if (topology.flows and sc.flow_count == len(topology.flows) and sc.variant == "fixed"
            and sc.alpha is None and sc.capacity is None and sc.units is None):
        return topology.example_instance()
    alpha = scenario_alpha(sc)
    if alpha is None:
        raise ValueError(f"Scenario {sc.name} needs alpha or a tight/moderate variant")
    return _with_alpha(_base_instance(sc), alpha)


_PARAMETRIC = re.compile(r"^(rtsa-cga|mfa-rtsa-cga)\((\d+(?:\.\d+)?)\)$")

SOLVERS = {
    "tsa-1x": lambda inst, t: solve_tsa(inst, 1, time_limit=t),
    "tsa-2x": lambda inst, t: solve_tsa(inst, 2, time_limit=t),
    "tsa-3x": lambda inst, t: solve_tsa(inst, 3, time_limit=t),
    "cga": lambda inst, t: solve_cga(inst, CgaOptions(time_limit=t)),
    "mfa": lambda inst, t: solve_mfa(inst, time_limit=t),
    "mfa-cga": lambda inst, t: solve_mfa_cga(inst, time_limit=t),
    "oracle": lambda inst, t: solve_full_mp(inst),
    "edf": lambda inst, t: solve_edf_bottleneck(inst),
    "continuous": lambda inst, t: continuous_mode(inst, time_limit=t),
}


def resolve_solver(name):
    """Return the runner for a solver name; rtsa-cga(P) and mfa-rtsa-cga(P) take a percent."""
    if name in SOLVERS:
        return SOLVERS[name]
    match = _PARAMETRIC.match(name)
    if match:
        p = float(match.group(2))
        if match.group(1) == "rtsa-cga":
            return lambda inst, t: solve_rtsa_cga(inst, p, time_limit=t)
        return lambda inst, t: solve_mfa_rtsa_cga(inst, p, time_limit=t)
    raise ValueError(f"Unknown solver {name!r}; expected one of {sorted(SOLVERS)} or rtsa-cga(P)/mfa-rtsa-cga(P)")


@dataclass(frozen=True)
class RunResult:
    scenario: str
    solver: str
    seed: int
    status: str
    objective: float | None
    wall_time: float
    phase1_time: float | None = None
    phase2_time: float | None = None
    reference: float | None = None
    reference_time: float | None = None
    detail: str = ""

    @property
    def solved(self):
        return self.status in (SolveStatus.OPTIMAL.value, SolveStatus.FEASIBLE.value)

    @property
    def gap_pct(self):
        if not self.solved or self.reference is None or self.reference <= 0:
            return None
        return 100.0 * (self.objective - self.reference) / self.reference


def _run(name, inst, time_limit):
    try:
        report, _ = resolve_solver(name)(inst, time_limit)
    except (IfdpError, ValueError) as exc:
        logger.warning("%s raised %s: %s", name, type(exc).__name__, exc)
        return "Error", None, 0.0, None, None, f"{type(exc).__name__}: {exc}"
    return (report.status.value, report.objective, report.wall_time,
            report.phase1_time, report.phase2_time, report.detail)


def run_instance(sc: Scenario, solvers, time_limit=None):
    """Solve one seeded instance with the CGA reference and every solver."""
    inst = generate_instance(sc)
    ref_status, ref_obj, ref_time, ref_p1, ref_p2, ref_detail = _run("cga", inst, time_limit)
    reference = ref_obj if ref_status == SolveStatus.OPTIMAL.value else None
    results = []
    for name in solvers:
        if name == "cga":
            outcome = (ref_status, ref_obj, ref_time, ref_p1, ref_p2, ref_detail)
        else:
            outcome = _run(name, inst, time_limit)
        status, objective, wall, p1, p2, detail = outcome
        results.append(RunResult(
            sc.name, name, sc.seed, status, objective, wall, p1, p2,
            reference, ref_time if ref_status == SolveStatus.OPTIMAL.value else None, detail,
        ))
    return results


def _mean(values):
    values = [v for v in values if v is not None]
    return math.fsum(values) / len(values) if values else None


def summarize(scenario, solver, results):
    """One CSV row for a (scenario, solver) cell."""
    n = len(results)

    def pct(count):
        return 100.0 * count / n if n else 0.0

    reduction = None
    paired = [r for r in results if r.solved and r.reference_time]
    if solver != "cga" and "cga" in solver and paired:
        base = math.fsum(r.reference_time for r in paired)
        reduction = 100.0 * (base - math.fsum(r.wall_time for r in paired)) / base if base > 0 else None
    return {
        "scenario": scenario,
        "solver": solver,
        "instances": n,
        "failure_pct": pct(sum(not r.solved for r in results)),
        "infeasible_pct": pct(sum(r.status in ("Infeasible", "NoSolution") for r in results)),
        "timeout_pct": pct(sum(r.status == "TimeLimit" for r in results)),
        "gap_pct": _mean(r.gap_pct for r in results),
        "time_s": _mean(r.wall_time for r in results),
        "phase1_s": _mean(r.phase1_time for r in results),
        "phase2_s": _mean(r.phase2_time for r in results),
        "reduction_pct": reduction,
    }


@dataclass
class BenchmarkResult:
    rows: list = field(default_factory=list)
    plot_rows: list = field(default_factory=list)
    results: list = field(default_factory=list)
    aborted: str = ""


def run_benchmark(
    scenarios,
    solvers,
    instances_per_cell=10,
    time_limit=None,
    workers=MAX_WORKERS,
    session=None,
    monitor=None,
    plot_data=False,
    gap_sweep=DEFAULT_GAP_SWEEP,
):
    """Run every scenario x solver cell; seeds are scenario.seed .. seed + instances - 1."""
    solvers = list(solvers)
    outcome = BenchmarkResult()
    if not solvers:
        return outcome
    session = session or SessionGuard()
    sweep = []
    if plot_data:
        sweep = [f"{kind}({p:g})" for p in gap_sweep for kind in ("rtsa-cga", "mfa-rtsa-cga")]
    run_names = solvers + [s for s in sweep if s not in solvers]

    for sc in scenarios:
        try:
            session.check_timeout()
        except RuntimeError as exc:
            outcome.aborted = str(exc)
            logger.warning("%s", exc)
            break
        if monitor is not None:
            for name in run_names:
                monitor.register(sc.name, name, instances_per_cell)
        seeds = [replace(sc, seed=sc.seed + k) for k in range(instances_per_cell)]
        cell = []
        with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
            futures = {executor.submit(run_instance, s, run_names, time_limit): s for s in seeds}
            for future in as_completed(futures):
                seeded = futures[future]
                try:
                    results = future.result()
                except (IfdpError, ValueError) as exc:
                    logger.warning("%s seed %d skipped: %s", seeded.name, seeded.seed, exc)
                    continue
                session.record_run()
                if monitor is not None:
                    for r in results:
                        monitor.record(r.scenario, r.solver, r.wall_time, failed=not r.solved)
                cell.extend(results)
        cell.sort(key=lambda r: (r.seed, run_names.index(r.solver)))
        outcome.results.extend(cell)
        for name in solvers:
            outcome.rows.append(summarize(sc.name, name, [r for r in cell if r.solver == name]))
        if plot_data:
            outcome.plot_rows.extend(_plot_rows(sc, solvers, sweep, gap_sweep, cell))
    return outcome


def _plot_rows(sc, solvers, sweep, gap_sweep, cell):
    rows = []
    for name in solvers:
        results = [r for r in cell if r.solver == name]
        gap = _mean(r.gap_pct for r in results)
        wall = _mean(r.wall_time for r in results)
        if gap is not None:
            rows.append({"series": "gap_vs_flows", "topology": sc.topology, "solver": name,
                         "x": sc.flow_count, "y": gap})
        if wall is not None:
            rows.append({"series": "time_vs_flows", "topology": sc.topology, "solver": name,
                         "x": sc.flow_count, "y": wall})
    for p in gap_sweep:
        for kind in ("rtsa-cga", "mfa-rtsa-cga"):
            name = f"{kind}({p:g})"
            reduction = summarize(sc.name, name, [r for r in cell if r.solver == name])["reduction_pct"]
            if reduction is not None:
                rows.append({"series": "reduction_vs_p", "topology": sc.topology, "solver": kind,
                             "x": p, "y": reduction})
    return rows


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return value


def write_csv(rows, out, fields=CSV_FIELDS):
    """Write rows to a path or an open text stream."""
    if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
        with open(out, "w", newline="", encoding="utf-8") as f:
            return write_csv(rows, f, fields)
    writer = csv.DictWriter(out, fieldnames=list(fields))
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(row.get(k)) for k in fields})


def format_table(rows):
    """Fixed-width metric table for terminals."""
    buffer = io.StringIO()
    header = f"{'Scenario':<28s} {'Solver':<20s} {'N':>3s} {'Fail%':>6s} {'Gap%':>8s} {'Time s':>9s} {'Red%':>7s}"
    buffer.write(header + "\n" + "-" * len(header) + "\n")
    for row in rows:
        buffer.write(
            f"{row['scenario']:<28s} {row['solver']:<20s} {row['instances']:>3d} "
            f"{row['failure_pct']:>6.1f} {_fixed(row['gap_pct'], 8, 3)} "
            f"{_fixed(row['time_s'], 9, 3)} {_fixed(row['reduction_pct'], 7, 1)}\n"
        )
    return buffer.getvalue()


def _fixed(value, width, digits):
    return f"{'-':>{width}s}" if value is None else f"{value:>{width}.{digits}f}"


_CONFIG_KEYS = {"scenarios", "solvers", "instances_per_cell", "time_limit", "output", "plot_data", "gap_sweep"}
_SCENARIO_KEYS = {"topology", "flow_count", "alpha", "variant", "capacity", "units", "size_range", "seed"}


@dataclass(frozen=True)
class BenchConfig:
    scenarios: tuple
    solvers: tuple
    instances_per_cell: int = 10
    time_limit: float | None = None
    output: str | None = None
    plot_data: str | None = None
    gap_sweep: tuple = DEFAULT_GAP_SWEEP


def loads_config(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    if not isinstance(doc, dict):
        raise ParseError("expected an object", field="<root>")
    for key in doc:
        if key not in _CONFIG_KEYS:
            raise ParseError("unknown field", field=key)
    for key in ("scenarios", "solvers"):
        if not isinstance(doc.get(key), list):
            raise ParseError("expected a list", field=key)
    scenarios = []
    for k, entry in enumerate(doc["scenarios"]):
        if not isinstance(entry, dict):
            raise ParseError("expected an object", field=f"scenarios[{k}]")
        for key in entry:
            if key not in _SCENARIO_KEYS:
                raise ParseError("unknown field", field=f"scenarios[{k}].{key}")
        values = dict(entry)
        for key in ("units", "size_range"):
            if key in values:
                values[key] = tuple(values[key])
        try:
            scenarios.append(Scenario(**values))
        except (TypeError, ValueError, KeyError) as exc:
            raise ParseError(str(exc), field=f"scenarios[{k}]") from exc
    for name in doc["solvers"]:
        try:
            resolve_solver(name)
        except ValueError as exc:
            raise ParseError(str(exc), field="solvers") from exc
    return BenchConfig(
        scenarios=tuple(scenarios),
        solvers=tuple(doc["solvers"]),
        instances_per_cell=int(doc.get("instances_per_cell", 10)),
        time_limit=doc.get("time_limit"),
        output=doc.get("output"),
        plot_data=doc.get("plot_data"),
        gap_sweep=tuple(doc.get("gap_sweep", DEFAULT_GAP_SWEEP)),
    )


def read_config(path):
    with open(path, encoding="utf-8") as f:
        return loads_config(f.read())
