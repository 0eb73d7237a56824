"""Command-line front end: ``vdofrac solve | converge | verify``.

Exit codes: 0 on success, 1 if a verification suite fails, 2 for
configuration or validation errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from vdofrac.config import ConfigError, RunConfig, load_config, make_grid
from vdofrac.convergence import REFINEMENT_PRESETS, run_plan
from vdofrac.estimates import (
    NotApplicableError,
    dirichlet_ledger,
    error_ledger,
    robin_ledger,
)
from vdofrac.problems import ProblemSpec, validate_problem
from vdofrac.scheme import MarchOptions, SchemeError, march
from vdofrac.verify import SUITES, VerifyContext, run_suites

logger = logging.getLogger("vdofrac")

EXIT_OK = 0
EXIT_SUITE_FAILURE = 1
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

#: pointwise runs reported for the two built-in problems
SOLVE_TABLES = {
    1: {"problem": "test1", "grid": {"N": 10, "tau": 0.01}, "eval_time": 0.99},
    4: {"problem": "test2", "grid": {"N": 10, "tau": 0.045}, "eval_time": 0.99},
}


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _dump_json(path: Path, obj: dict) -> None:
    _write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def solution_csv(x: np.ndarray, t: float, y: np.ndarray,
                 exact: np.ndarray | None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if exact is None:
        writer.writerow(["x", "t", "y"])
        for xi, yi in zip(x, y):
            writer.writerow([repr(float(xi)), repr(t), repr(float(yi))])
    else:
        writer.writerow(["x", "t", "y", "exact", "error"])
        for xi, yi, ui in zip(x, y, exact):
            writer.writerow([repr(float(xi)), repr(t), repr(float(yi)),
                             repr(float(ui)), repr(abs(float(yi) - float(ui)))])
    return buf.getvalue()


def _with_inferred_bounds(problem: ProblemSpec, report) -> ProblemSpec:
    changes = {}
    if math.isnan(problem.c1) and report.inferred_c1 is not None:
        changes["c1"] = report.inferred_c1
    if problem.beta0 is not None and math.isnan(problem.beta0) \
            and report.inferred_beta0 is not None:
        changes["beta0"] = report.inferred_beta0
    return dataclasses.replace(problem, **changes) if changes else problem


def _ledger_for(result, problem: ProblemSpec):
    if problem.is_robin:
        return "robin", robin_ledger(result.field, problem, result.kernel)
    try:
        return "dirichlet", dirichlet_ledger(result.field, problem, result.kernel)
    except NotApplicableError:
        if problem.exact is None:
            raise
        return "error", error_ledger(result.field, problem, result.kernel)


# {{{ commands


def cmd_solve(config: RunConfig, out: Path) -> int:
    problem = config.problem
    summary: dict = {"command": "solve", "problem": problem.name,
                     "eval_time": config.eval_time, "quad_nodes": config.quad_nodes}
    try:
        grid = make_grid(problem, config.N, config.eval_time, config.tau, config.steps)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        summary["error"] = str(exc)
        _dump_json(out / "summary.json", summary)
        return EXIT_INVALID

    summary["grid"] = {"l": grid.l, "N": grid.N, "h": grid.h, "tau": grid.tau,
                       "steps": grid.j0}

    report = validate_problem(problem, grid, config.quad_nodes)
    problem = _with_inferred_bounds(problem, report)
    if problem is not config.problem:
        report = validate_problem(problem, grid, config.quad_nodes)
    summary["validation"] = report.to_dict()
    for warning in report.warnings:
        logger.warning("%s", warning)
    if not report.ok:
        for violation in report.violations:
            print(f"validation: {violation}", file=sys.stderr)
        _dump_json(out / "summary.json", summary)
        return EXIT_INVALID

    summary["theta_max_sample"] = problem.dist.theta_max(problem.l)
    if problem.theta_max is not None:
        summary["theta_max_declared"] = problem.theta_max

    try:
        result = march(problem, grid, MarchOptions(quad_nodes=config.quad_nodes,
                                                   workers=config.parallel))
    except (SchemeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        summary["error"] = str(exc)
        _dump_json(out / "summary.json", summary)
        return EXIT_NUMERICAL

    y = result.field.levels[-1]
    t = grid.j0 * grid.tau
    exact = None
    if problem.exact is not None:
        exact = np.broadcast_to(problem.exact(grid.x, t), grid.x.shape).astype(np.float64)
        summary["max_error"] = float(np.max(np.abs(y - exact)))
    _write(out / "solution.csv", solution_csv(grid.x, t, y, exact))

    summary["timings"] = result.timings
    summary["max_solver_residual"] = max(r.residual for r in result.reports)

    if config.ledger:
        tic = time.perf_counter()
        try:
            kind, ledger = _ledger_for(result, problem)
        except NotApplicableError as exc:
            summary["ledger"] = {"skipped": str(exc)}
        else:
            _write(out / "ledger.csv", ledger.to_csv())
            summary["ledger"] = {"kind": kind, "violations": ledger.violations(),
                                 "min_slack": float(np.min(ledger.slack))}
        summary["timings"]["ledger"] = time.perf_counter() - tic

    _dump_json(out / "summary.json", summary)
    if not np.all(np.isfinite(y)):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_converge(source, plan: dict, eval_time: float, out: Path,
                 quad_nodes: int = 64, parallel: int = 1) -> int:
    tic = time.perf_counter()
    try:
        table = run_plan(source, plan, eval_time=eval_time,
                         quad_nodes=quad_nodes, parallel=parallel)
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    _write(out / "convergence.csv", table.to_csv())
    failed = [row for row in table.rows if row.status != "ok"]
    _dump_json(out / "summary.json", {
        "command": "converge",
        "plan": plan,
        "eval_time": eval_time,
        "quad_nodes": quad_nodes,
        "rows": [dataclasses.asdict(row) for row in table.rows],
        "timings": {"total": time.perf_counter() - tic},
    })
    for row in failed:
        print(f"case N={row.N}, steps={row.steps}: {row.status}", file=sys.stderr)
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_verify(suites: list[str] | None, ctx: VerifyContext, out: Path | None) -> int:
    results = run_suites(suites, ctx)
    report = {
        "passed": all(r.passed for r in results.values()),
        "inject_fault": ctx.inject_fault,
        "problems": list(ctx.problems),
        "suites": {name: r.to_dict() for name, r in results.items()},
    }
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out is not None:
        _write(out / "verify.json", text)
    sys.stdout.write(text)
    for name, r in results.items():
        print(f"{name:12s} {'pass' if r.passed else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_SUITE_FAILURE


# }}}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vdofrac",
        description="Difference schemes for variable-distributed order "
                    "time-fractional diffusion equations.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--out", type=Path, default=Path("vdofrac-out"),
                       help="output directory (default: %(default)s)")
        p.add_argument("--quad-nodes", type=int, default=None,
                       help="Gauss-Legendre nodes in gamma (default: 64)")
        p.add_argument("--parallel", type=int, default=None,
                       help="worker count")

    solve = sub.add_parser("solve", help="march one problem to eval_time")
    common(solve)
    solve.add_argument("--table", type=int, choices=sorted(SOLVE_TABLES),
                       help="run a built-in pointwise table instead of --config")
    solve.add_argument("--ledger", action="store_true",
                       help="evaluate the discrete energy estimate per level")

    converge = sub.add_parser("converge", help="run a refinement study")
    common(converge)
    converge.add_argument("--table", type=int, choices=sorted(REFINEMENT_PRESETS),
                          help="run a built-in refinement study instead of --config")

    verify = sub.add_parser("verify", help="run the property suites")
    verify.add_argument("--config", type=Path,
                        help="configuration whose built-in problem the suites use")
    verify.add_argument("--out", type=Path, default=None)
    verify.add_argument("--quad-nodes", type=int, default=64)
    verify.add_argument("--suite", action="append", choices=sorted(SUITES),
                        help="suite to run (repeatable; default: all)")
    verify.add_argument("--inject-fault", action="store_true",
                        help=argparse.SUPPRESS)
    return parser


def _load(args) -> RunConfig:
    if getattr(args, "table", None) is not None:
        if args.config is not None:
            raise ConfigError("--table", "use either --table or --config")
        if args.command == "solve":
            return load_config(SOLVE_TABLES[args.table])
        source, plan = REFINEMENT_PRESETS[args.table]
        return load_config({"problem": source, "grid": {"N": 10, "steps": 1},
                            "eval_time": 0.99, "plan": plan})
    if args.config is None:
        raise ConfigError("--config", "a configuration file or --table is required")
    return load_config(args.config)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")

    if args.command == "verify":
        ctx = VerifyContext(quad_nodes=args.quad_nodes, inject_fault=args.inject_fault)
        if args.config is not None:
            try:
                raw = json.loads(args.config.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_INVALID
            problem = raw.get("problem") if isinstance(raw, dict) else None
            if not isinstance(problem, str):
                print("error: problem: verify needs a built-in problem name",
                      file=sys.stderr)
                return EXIT_INVALID
            ctx = dataclasses.replace(ctx, problems=(problem,))
        return cmd_verify(args.suite, ctx, args.out)

    try:
        config = _load(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.quad_nodes is not None:
        config.quad_nodes = args.quad_nodes
    if args.parallel is not None:
        config.parallel = args.parallel
    if config.quad_nodes < 2 or config.parallel < 1:
        print("error: --quad-nodes must be >= 2 and --parallel >= 1", file=sys.stderr)
        return EXIT_INVALID

    if args.command == "solve":
        config.ledger = config.ledger or args.ledger
        return cmd_solve(config, args.out)

    if config.plan is None:
        print("error: plan: converge needs a refinement plan", file=sys.stderr)
        return EXIT_INVALID
    return cmd_converge(config.problem_source, config.plan, config.eval_time, args.out,
                        quad_nodes=config.quad_nodes, parallel=config.parallel)


if __name__ == "__main__":
    sys.exit(main())
