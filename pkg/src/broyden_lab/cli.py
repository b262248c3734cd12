"""Command-line harness: single solves, benchmark sweeps, verification suites
and rate tables.

Exit codes: 0 success or convergence, 1 usage error, 2 iteration limit,
3 degenerate update or domain error.
"""

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from jsonschema import ValidationError

from . import __version__, theory, verify
from .experiments import ExperimentSpec, default_scale, make_config, make_x0, run_bench
from .problems import make_problem
from .solver import InitScheme, Status, solve
from .traceio import atomic_write, write_trace

EXIT_OK, EXIT_USAGE, EXIT_MAXITERS, EXIT_FAILED = 0, 1, 2, 3

STATUS_EXIT = {
    Status.CONVERGED: EXIT_OK,
    Status.MAX_ITERS: EXIT_MAXITERS,
    Status.DEGENERATE: EXIT_FAILED,
    Status.DOMAIN_ERROR: EXIT_FAILED,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="broyden-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="run one solve and write its trace")
    s.add_argument("--problem", choices=["linear", "logsumexp", "hequation"], default="hequation")
    s.add_argument("--n", type=int, default=10, help="dimension (N for the H-equation)")
    s.add_argument("--m", type=int, default=None, help="log-sum-exp terms (default 2n)")
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--c-const", type=float, default=0.9, help="H-equation constant in (0, 1)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--method", choices=["newton", "classical", "bad", "greedy", "random"], default="greedy")
    s.add_argument("--direction", choices=["basis", "sphere", "gaussian"], default="basis")
    s.add_argument("--init", choices=[i.value for i in InitScheme], default="exact-j0")
    s.add_argument("--scale", type=float, default=None,
                   help="B0 scale; default L for log-sum-exp identity starts, 10 for H-equation, else 1")
    s.add_argument("--x0", choices=["sphere", "normal", "near-solution"], default="sphere")
    s.add_argument("--rho", type=float, default=0.1, help="relative offset for --x0 near-solution")
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--max-iters", type=int, default=500)
    s.add_argument("--out", default=".", help="output directory")
    s.add_argument("--record-sigma", action="store_true")
    s.add_argument("--debug", action="store_true", help="maintain B for every method and audit B H = I")
    s.add_argument("--fd-jacobian", action="store_true",
                   help="finite-difference Jacobian actions (outside the analysed method)")

    b = sub.add_parser("bench", help="run a benchmark spec file")
    b.add_argument("spec", help="experiment spec JSON")
    b.add_argument("--out", default=None, help="output directory (overrides the spec)")

    v = sub.add_parser("verify", help="run a property suite")
    v.add_argument("suite", choices=[*verify.SUITES, "all"])

    r = sub.add_parser("rates", help="classical vs greedy rate envelopes as CSV")
    r.add_argument("--n", type=int, required=True)
    r.add_argument("--k-max", type=int, default=None, help="default: 2x the crossover iteration")
    r.add_argument("--out", default=None, help="CSV file (default stdout)")
    return parser


def cmd_solve(args):
    try:
        p = make_problem(args.problem, args.n, seed=args.seed, m=args.m, gamma=args.gamma, c=args.c_const)
        init = InitScheme(args.init)
        scale = args.scale if args.scale is not None else default_scale(p, init)
        cfg = make_config(args.method, init, scale, tol=args.tol, max_iters=args.max_iters, seed=args.seed,
                          direction=args.direction, record_sigma=args.record_sigma,
                          fd_jacobian=args.fd_jacobian, debug=args.debug)
        x0 = make_x0(p, args.x0, args.seed, args.rho)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    trace = solve(p, x0, cfg)
    trace.metadata["x0"] = {"distribution": args.x0, "rho": args.rho, "seed": args.seed}
    path = Path(args.out) / f"{args.problem}_{args.method}.csv"
    write_trace(trace, path)
    res = "-" if trace.final_residual is None else f"{trace.final_residual:.3e}"
    print(f"status={trace.status.value} iterations={trace.iterations} residual={res} trace={path}")
    if trace.message:
        print(trace.message, file=sys.stderr)
    return STATUS_EXIT[trace.status]


def cmd_bench(args):
    try:
        spec = ExperimentSpec.from_file(args.spec)
    except ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "top level"
        raise UsageError(f"bad spec file ({where}): {exc.message}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"bad spec file: {exc}") from exc
    if not spec.methods:
        raise UsageError("spec lists no methods")
    summary = run_bench(spec, out_dir=args.out)
    for c in summary["cells"]:
        sig = "-" if c["final_sigma_rel"] is None else f"{c['final_sigma_rel']:.3e}"
        res = "-" if c["final_residual"] is None else f"{c['final_residual']:.3e}"
        print(f"{c['method']:>9} {c['init']:>15}  {c['status']:<12} k={c['iterations']}  "
              f"res={res}  sigma_rel={sig}")
    if summary["failed_cells"] == len(summary["cells"]):
        return EXIT_FAILED
    return EXIT_OK


def cmd_verify(args):
    checks = verify.run_suite(args.suite)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_FAILED


def rates_csv(n, k_max):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "k", "original_bound", "greedy_bound", "greedy_faster"])
    for k, orig, greedy, faster in theory.compare_rates(n, k_max):
        w.writerow([n, k, format(orig, ".17g"), format(greedy, ".17g"), str(faster).lower()])
    return buf.getvalue()


def cmd_rates(args):
    try:
        k_max = args.k_max or 2 * theory.crossover_iteration(args.n)
        text = rates_csv(args.n, k_max)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "verify": cmd_verify, "rates": cmd_rates}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"broyden-lab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
