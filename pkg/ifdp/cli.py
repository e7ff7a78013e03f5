"""Command-line entry point: ``python -m ifdp <command> ...``.

Commands:
    solve       solve an instance file and print the report
    generate    write a seeded benchmark instance
    reduce3sat  turn a DIMACS CNF formula into an instance
    validate    check a schedule file against an instance
    bench       run a benchmark configuration

Exit codes: 0 solved, 1 proven infeasible (or invalid schedule),
2 heuristic found no solution, 3 time limit, 4 usage or input error.
"""

import argparse
import logging
import os
import sys

from ifdp import bench, serialization
from ifdp.cga import CgaOptions, solve_cga, solve_mfa_cga, solve_mfa_rtsa_cga, solve_rtsa_cga
from ifdp.errors import IfdpError
from ifdp.guardrails import LOG_LEVEL, MAX_WORKERS, SessionGuard
from ifdp.mfa import solve_mfa
from ifdp.model import SolveStatus, evaluate_schedule
from ifdp.monitor import ProgressMonitor
from ifdp.oracle import continuous_mode, solve_edf_bottleneck, solve_full_mp
from ifdp.reduction import read_dimacs, reduce_3sat
from ifdp.tsa import MULTIPLIERS, solve_tsa


EXIT_SOLVED = 0
EXIT_INFEASIBLE = 1
EXIT_NO_SOLUTION = 2
EXIT_TIME_LIMIT = 3
EXIT_USAGE = 4

EXIT_CODES = {
    SolveStatus.OPTIMAL: EXIT_SOLVED,
    SolveStatus.FEASIBLE: EXIT_SOLVED,
    SolveStatus.INFEASIBLE: EXIT_INFEASIBLE,
    SolveStatus.NO_SOLUTION: EXIT_NO_SOLUTION,
    SolveStatus.TIME_LIMIT: EXIT_TIME_LIMIT,
}

INSTANCES_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "instances")

logger = logging.getLogger(__name__)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def resolve_instance(name):
    """A path, or the name of a bundled instance under ifdp/instances/."""
    if os.path.exists(name):
        return name
    bundled = os.path.join(INSTANCES_DIR, name if name.endswith(".json") else f"{name}.json")
    if os.path.exists(bundled):
        return bundled
    raise UsageError(f"No instance file or bundled instance named {name!r}")


def build_parser():
    parser = _Parser(prog="ifdp", description="Integer flow with deadline solvers.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="More logging on stderr (-v info, -vv debug).")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    solve = sub.add_parser("solve", help="Solve an instance and print the report.")
    solve.add_argument("-i", "--instance", required=True, help="Instance file or bundled name (e.g. triangle).")
    solve.add_argument("-o", "--output", help="Write the schedule here.")
    solve.add_argument("--algorithm", required=True,
                       choices=["tsa", "cga", "mfa", "oracle", "edf", "continuous"])
    solve.add_argument("--slices", default="1x", choices=sorted(MULTIPLIERS),
                       help="TSA slice multiplier.")
    solve.add_argument("--warm-start", choices=["mfa"], help="CGA initial columns from MFA.")
    solve.add_argument("--bound", choices=["rtsa"], help="CGA stops within --gap of this lower bound.")
    solve.add_argument("--gap", type=float, help="Gap tolerance in percent for --bound.")
    solve.add_argument("--fast-pricing", action="store_true",
                       help="Accept the first improving column per pricing problem.")
    solve.add_argument("--pricing-workers", type=int, default=1,
                       help="Threads solving pricing problems of one sweep.")
    solve.add_argument("--time-limit", type=float, help="Seconds (default IFDP_TIME_LIMIT).")

    generate = sub.add_parser("generate", help="Write a seeded benchmark instance.")
    generate.add_argument("--scenario", required=True, help="Topology name (small, softlayer, geant, triangle, star).")
    generate.add_argument("--flows", type=int, required=True)
    generate.add_argument("--seed", type=int, default=0)
    generate.add_argument("--alpha", type=float, help="Deadline factor: t_f = alpha * e_f.")
    rule = generate.add_mutually_exclusive_group()
    rule.add_argument("--tight", action="store_true", help="Calibrate alpha to the feasibility boundary.")
    rule.add_argument("--moderate", action="store_true", help="Tight alpha raised by 30%%.")
    generate.add_argument("-o", "--output", help="Instance file (stdout when absent).")

    reduce = sub.add_parser("reduce3sat", help="Reduce a DIMACS CNF formula to an instance.")
    reduce.add_argument("-i", "--input", required=True)
    reduce.add_argument("-o", "--output", help="Instance file (stdout when absent).")

    validate = sub.add_parser("validate", help="Check a schedule against an instance.")
    validate.add_argument("-i", "--instance", required=True)
    validate.add_argument("-s", "--schedule", required=True)

    bench_cmd = sub.add_parser("bench", help="Run a benchmark configuration.")
    bench_cmd.add_argument("--config", required=True)
    bench_cmd.add_argument("--emit-plot-data", help="Write plot series CSV here.")
    bench_cmd.add_argument("--workers", type=int, default=MAX_WORKERS)
    bench_cmd.add_argument("--monitor", action="store_true", help="Print periodic progress tables.")
    return parser


def _configure_logging(verbose):
    level = {0: LOG_LEVEL, 1: "INFO"}.get(verbose, "DEBUG")
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _run_solver(args, inst):
    if args.algorithm != "cga" and (args.warm_start or args.bound or args.fast_pricing):
        raise UsageError("--warm-start, --bound and --fast-pricing apply to --algorithm cga only")
    if (args.bound is None) != (args.gap is None):
        raise UsageError("--bound and --gap must be given together")
    if args.algorithm == "tsa":
        return solve_tsa(inst, args.slices, time_limit=args.time_limit)
    if args.algorithm == "mfa":
        return solve_mfa(inst, time_limit=args.time_limit)
    if args.algorithm == "oracle":
        return solve_full_mp(inst)
    if args.algorithm == "edf":
        return solve_edf_bottleneck(inst)
    if args.algorithm == "continuous":
        return continuous_mode(inst, time_limit=args.time_limit)
    options = {"fast_pricing": args.fast_pricing, "pricing_workers": args.pricing_workers}
    if args.bound and args.warm_start:
        return solve_mfa_rtsa_cga(inst, args.gap, time_limit=args.time_limit, **options)
    if args.bound:
        return solve_rtsa_cga(inst, args.gap, time_limit=args.time_limit, **options)
    if args.warm_start:
        return solve_mfa_cga(inst, time_limit=args.time_limit, **options)
    return solve_cga(inst, CgaOptions(time_limit=args.time_limit, **options))


def cmd_solve(args):
    inst = serialization.read_instance(resolve_instance(args.instance))
    report, schedule = _run_solver(args, inst)
    print(report.to_text())
    if args.output and schedule is not None:
        serialization.write_schedule(inst, schedule, args.output)
    return EXIT_CODES[report.status]


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def cmd_generate(args):
    variant = "tight" if args.tight else "moderate" if args.moderate else "fixed"
    scenario = bench.Scenario(args.scenario, args.flows, alpha=args.alpha, variant=variant, seed=args.seed)
    inst = bench.generate_instance(scenario)
    _emit(serialization.dumps_instance(inst, description=f"{scenario.name} seed {args.seed}"), args.output)
    return EXIT_SOLVED


def cmd_reduce(args):
    with open(args.input, encoding="utf-8") as f:
        formula = read_dimacs(f.read())
    inst = reduce_3sat(formula)
    description = f"3-SAT reduction of {os.path.basename(args.input)}"
    _emit(serialization.dumps_instance(inst, description=description), args.output)
    return EXIT_SOLVED


def cmd_validate(args):
    inst = serialization.read_instance(resolve_instance(args.instance))
    schedule = serialization.read_schedule(args.schedule, inst)
    evaluation = evaluate_schedule(inst, schedule)
    if evaluation.feasible:
        print(f"valid: completion {evaluation.completion:.12g}")
        return EXIT_SOLVED
    for violation in evaluation.violations:
        print(violation)
    return EXIT_INFEASIBLE


def cmd_bench(args):
    config = bench.read_config(args.config)
    plot_path = args.emit_plot_data or config.plot_data
    monitor = ProgressMonitor() if args.monitor else None
    session = SessionGuard()
    if monitor is not None:
        monitor.start()
    try:
        outcome = bench.run_benchmark(
            config.scenarios, config.solvers,
            instances_per_cell=config.instances_per_cell,
            time_limit=config.time_limit,
            workers=args.workers,
            session=session,
            monitor=monitor,
            plot_data=bool(plot_path),
            gap_sweep=config.gap_sweep,
        )
    finally:
        if monitor is not None:
            try:
                monitor.stop()
            except Exception:
                pass
    if config.output:
        bench.write_csv(outcome.rows, config.output)
    if plot_path:
        bench.write_csv(outcome.plot_rows, plot_path, fields=bench.PLOT_FIELDS)
    print(bench.format_table(outcome.rows), end="")
    print(f"\n{'='*60}")
    print("Benchmark Summary")
    print(f"{'='*60}")
    for key, value in session.summary().items():
        print(f"  {key}: {value}")
    if outcome.aborted:
        print(f"  aborted: {outcome.aborted}")
        return EXIT_TIME_LIMIT
    return EXIT_SOLVED


COMMANDS = {
    "solve": cmd_solve,
    "generate": cmd_generate,
    "reduce3sat": cmd_reduce,
    "validate": cmd_validate,
    "bench": cmd_bench,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, IfdpError, ValueError, OSError) as exc:
        print(f"ifdp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
