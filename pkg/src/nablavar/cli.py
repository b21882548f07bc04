"""Command-line front end.

Exit codes:

    0  success
    2  malformed problem file, expression, trajectory or arguments
    3  solver failure (non-convergence or singular system)
    4  invalid time scale
    5  ``check``: residuals above tolerance
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ._newton import SolverOptions
from .errors import DomainError, ExprError, SolverError, TimeScaleError
from .expr import eval_value, parse
from .nabla import GridFunction, nabla_derivative, nabla_integral
from .octrl import certify_convexity, hamiltonian_residuals, objective, solve_control
from .problem import (
    ProblemFile,
    ProblemFileError,
    control_csv,
    lagrange_csv,
    load_problem,
    read_trajectory,
)
from .timescale import from_descriptor
from .varsolve import evaluate_action, residual_report, solve_lagrange

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_TIMESCALE = 4
EXIT_CHECK = 5

log = logging.getLogger("nablavar")


def _g17(value: float) -> str:
    return f"{value:.17g}"


def _options(pf: ProblemFile, args) -> SolverOptions:
    tol = args.tol if args.tol is not None else pf.options.tol
    max_iters = args.max_iters if getattr(args, "max_iters", None) is not None else pf.options.max_iters
    try:
        return SolverOptions(tol=tol, max_iters=max_iters)
    except ValueError as exc:
        raise ProblemFileError(str(exc)) from None


def _print_report(summary: dict) -> None:
    for key, value in summary.items():
        if isinstance(value, float):
            value = _g17(value)
        print(f"{key} = {value}")


def cmd_solve(args) -> int:
    pf = load_problem(args.problem)
    opts = _options(pf, args)
    stem = Path(args.problem).name.split(".")[0]
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.problem).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    p = pf.problem
    try:
        if pf.kind == "lagrange":
            sol = solve_lagrange(p, opts)
            payload = {
                "kind": "lagrange",
                "objective": sol.objective,
                "report": sol.report.summary(),
                "t": p.ts.points.tolist(),
                "x": sol.x.values.tolist(),
            }
            table = lagrange_csv(sol)
        else:
            sol = solve_control(p, opts)
            cert = certify_convexity(p, sol, samples=args.samples, seed=args.seed)
            payload = {
                "kind": "control",
                "objective": sol.objective,
                "report": sol.report.summary(),
                "regressivity_ok": sol.regressivity_ok,
                "certificate": cert.to_dict(),
                "t": p.ts.points.tolist(),
                "x": sol.x.values.tolist(),
                "u_rho": sol.w.tolist(),
                "p": sol.p.values.tolist(),
            }
            table = control_csv(sol)
    except DomainError as exc:
        print(f"error: evaluation failed during solve: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if args.format in ("json", "both"):
        (out_dir / f"{stem}.solution.json").write_text(json.dumps(payload, indent=2) + "\n")
    if args.format in ("csv", "both"):
        (out_dir / f"{stem}.trajectory.csv").write_text(table)
    print(f"objective = {_g17(sol.objective)}")
    _print_report(sol.report.summary())
    if pf.kind == "control":
        print(f"regressivity_ok = {sol.regressivity_ok}")
        print(f"certificate = {payload['certificate']['verdict']}")
    return EXIT_OK


def _report_for(pf: ProblemFile, path: str):
    p = pf.problem
    if pf.kind == "lagrange":
        cols = read_trajectory(path, p.ts, ("x",))
        return residual_report(p, cols["x"])
    cols = read_trajectory(path, p.ts, ("x", "u_rho", "p"))
    return hamiltonian_residuals(p, cols["x"], cols["u_rho"], cols["p"])


def cmd_check(args) -> int:
    pf = load_problem(args.problem)
    tol = args.tol if args.tol is not None else pf.options.tol
    report = _report_for(pf, args.trajectory)
    _print_report(report.summary())
    ok = report.max_abs <= tol
    print("PASS" if ok else f"FAIL (max_abs > tol = {_g17(tol)})")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_eval(args) -> int:
    pf = load_problem(args.problem)
    p = pf.problem
    if pf.kind == "lagrange":
        cols = read_trajectory(args.trajectory, p.ts, ("x",))
        value = evaluate_action(p, cols["x"])
    else:
        cols = read_trajectory(args.trajectory, p.ts, ("x", "u_rho"))
        value = objective(p, cols["x"], cols["u_rho"])
    print(_g17(value))
    return EXIT_OK


def _grid_function(args) -> GridFunction:
    raw = args.timescale
    if not raw.lstrip().startswith("{"):
        try:
            raw = Path(raw).read_text()
        except OSError as exc:
            raise ProblemFileError(f"cannot read time scale: {exc}") from None
    try:
        desc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"invalid time scale JSON: {exc.msg}") from None
    ts = from_descriptor(desc)
    e = parse(args.expr)
    e.check_variables(frozenset("t"), "expression")
    params = {}
    for item in args.param:
        name, sep, value = item.partition("=")
        try:
            params[name.strip()] = float(value)
        except ValueError:
            sep = ""
        if not sep:
            raise ProblemFileError(f"--param must look like name=number, got {item!r}")
    values = np.broadcast_to(np.asarray(eval_value(e, {"t": ts.points}, params), dtype=float), (len(ts),))
    try:
        return GridFunction(ts, values)
    except ValueError as exc:
        raise ProblemFileError(str(exc)) from None


def cmd_integrate(args) -> int:
    f = _grid_function(args)
    a = f.ts.a if args.lower is None else args.lower
    b = f.ts.b if args.upper is None else args.upper
    print(_g17(nabla_integral(f, a, b)))
    return EXIT_OK


def cmd_differentiate(args) -> int:
    d = nabla_derivative(_grid_function(args))
    print("t,value")
    for t, v in zip(d.points.tolist(), d.values.tolist()):
        print(f"{_g17(t)},{_g17(v)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nablavar",
        description="Nabla calculus on finite time scales and extremals with free-endpoint actions.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log Newton iterations")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a problem file")
    s.add_argument("problem")
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--out-dir")
    s.add_argument("--format", choices=("json", "csv", "both"), default="both")
    s.add_argument("--seed", type=int, default=0, help="seed for convexity sampling")
    s.add_argument("--samples", type=int, default=20, help="convexity samples per kappa-point")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("check", help="residuals of a trajectory CSV")
    c.add_argument("problem")
    c.add_argument("trajectory")
    c.add_argument("--tol", type=float)
    c.set_defaults(func=cmd_check)

    e = sub.add_parser("eval", help="action (objective) of a trajectory CSV")
    e.add_argument("problem")
    e.add_argument("trajectory")
    e.set_defaults(func=cmd_eval)

    for name, func, helptext in (
        ("integrate", cmd_integrate, "nabla integral of f(t)"),
        ("differentiate", cmd_differentiate, "nabla derivative of f(t) at kappa-points"),
    ):
        g = sub.add_parser(name, help=helptext)
        g.add_argument("--timescale", required=True, help="JSON descriptor or a file containing one")
        g.add_argument("--expr", required=True, help="expression in t and parameters")
        g.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")
        if name == "integrate":
            g.add_argument("--from", dest="lower", type=float)
            g.add_argument("--to", dest="upper", type=float)
        g.set_defaults(func=func)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except TimeScaleError as exc:
        print(f"error: invalid time scale: {exc}", file=sys.stderr)
        return EXIT_TIMESCALE
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ProblemFileError, ExprError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
