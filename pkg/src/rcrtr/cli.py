"""Command line front end.

    rcrtr solve --matrix A.mtx --rhs b.txt --algorithm l2 --projector qr --out run.json
    rcrtr generate --n 1000 --density 0.1 --seed 0 --matrix A.mtx --rhs b.txt
    rcrtr bench suite.txt --outdir results/

Exit status: 0 when the solve converged, 2 when it stopped for any other
reason, 1 for usage and I/O errors.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__
from .harness import (
    RunResult,
    SuiteError,
    parse_suite,
    run_suite,
    solve,
    write_profile_csv,
    write_results_csv,
)
from .mmio import ParseError, load_matrix_market, load_vector, save_matrix_market, save_vector
from .problem import (
    ConstraintSystem,
    ConvexQuadratic,
    FeasibilityError,
    ProblemInstance,
    Rosenbrock,
    gen_experiment2_constraints,
    make_rng,
)
from .trust import TrConfig

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 is reserved for "did not converge"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(kind):
    def conv(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rcrtr", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve one problem and write a JSON result")
    s.add_argument("--matrix", required=True,
                   help="MatrixMarket file, or 'synthetic' to generate one (see --n)")
    s.add_argument("--rhs", default="synthetic",
                   help="vector file, or 'synthetic' for b = A x_ref with random x_ref")
    s.add_argument("--x0", help="warm start vector file (repaired if infeasible)")
    s.add_argument("--n", type=_positive(int), help="size of a synthetic matrix")
    s.add_argument("--density", type=float, default=0.1)
    s.add_argument("--objective", choices=("rosenbrock", "quadratic"), default="rosenbrock")
    s.add_argument("--algorithm", choices=("l2", "sc"), default="l2")
    s.add_argument("--projector", choices=("qr", "lsqr"), default="qr")
    s.add_argument("--memory", type=_positive(int), default=5)
    s.add_argument("--tol-grad", type=_positive(float), default=1e-5)
    s.add_argument("--tol-feas", type=_positive(float), default=5e-8)
    s.add_argument("--max-iter", type=_positive(int), default=100_000)
    s.add_argument("--seed", type=_seed, default=0)
    s.add_argument("--out", required=True, help="result JSON path ('-' for stdout)")
    s.add_argument("--x-out", help="also write the final iterate here")
    s.add_argument("--trace", action="store_true", help="include per-iteration rows in the JSON")

    g = sub.add_parser("generate", help="write a random sparse constraint system")
    g.add_argument("--n", type=_positive(int), required=True)
    g.add_argument("--density", type=float, default=0.1)
    g.add_argument("--seed", type=_seed, default=0)
    g.add_argument("--matrix", required=True)
    g.add_argument("--rhs", required=True)

    b = sub.add_parser("bench", help="run a suite file; write results.csv and profile.csv")
    b.add_argument("suite")
    b.add_argument("--outdir", default=".")
    b.add_argument("--jobs", type=_positive(int), default=1)
    return ap


def _load_problem(args) -> ProblemInstance:
    if args.matrix == "synthetic":
        if args.n is None:
            raise UsageError("--matrix synthetic needs --n")
        if args.rhs != "synthetic":
            raise UsageError("--matrix synthetic generates its own right-hand side")
        cs = gen_experiment2_constraints(args.n, args.density, seed=args.seed)
        name = f"synthetic-n{args.n}-d{args.density:g}-s{args.seed}"
    else:
        A = load_matrix_market(args.matrix)
        if args.rhs == "synthetic":
            b = A @ make_rng(args.seed).uniform(-1.0, 1.0, A.shape[1])
        else:
            b = load_vector(args.rhs)
        cs = ConstraintSystem(A, b)
        name = os.path.splitext(os.path.basename(args.matrix))[0]
    n = cs.n
    if args.objective == "rosenbrock":
        obj = Rosenbrock(n)
    else:
        obj = ConvexQuadratic.separable(n, seed=args.seed)
    x0 = load_vector(args.x0) if args.x0 else None
    return ProblemInstance(obj, cs, warm_start=x0, name=name)


def cmd_solve(args) -> int:
    problem = _load_problem(args)
    cfg = TrConfig(l=args.memory, eps1=args.tol_grad, feas_tol=args.tol_feas,
                   max_iter=args.max_iter, keep_trace=args.trace)
    solver = f"{args.algorithm}-{args.projector}"
    run = solve(problem, solver, cfg)
    res = RunResult.from_run(run, problem.name, solver, with_trace=args.trace)
    text = res.to_json(indent=2)
    if args.out == "-":
        print(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    if args.x_out:
        save_vector(args.x_out, run.x)
    print(f"{res.problem} {res.solver}: {res.status} after {res.iterations} iterations, "
          f"|gP|inf={res.grad_inf_norm:.2e} feas={res.feasibility_norm:.2e}", file=sys.stderr)
    return EXIT_OK if res.solved else EXIT_NOT_CONVERGED


def cmd_generate(args) -> int:
    cs = gen_experiment2_constraints(args.n, args.density, seed=args.seed)
    save_matrix_market(args.matrix, cs.A)
    save_vector(args.rhs, cs.b)
    return EXIT_OK


def cmd_bench(args) -> int:
    entries = parse_suite(args.suite)
    results = run_suite(entries, jobs=args.jobs)
    os.makedirs(args.outdir, exist_ok=True)
    write_results_csv(os.path.join(args.outdir, "results.csv"), results)
    write_profile_csv(os.path.join(args.outdir, "profile.csv"), results)
    for r in results:
        print(f"{r.problem:>20s} {r.solver:8s} {r.status:14s} {r.iterations:7d} "
              f"{r.wall_time_seconds:9.3f}s", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"solve": cmd_solve, "generate": cmd_generate, "bench": cmd_bench}[args.command]
    try:
        return handler(args)
    except (OSError, ParseError, SuiteError, UsageError, FeasibilityError, ValueError) as e:
        print(f"rcrtr: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
