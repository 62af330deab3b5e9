"""Benchmark suites with their run records, summarized as Dolan-More profiles."""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from .mmio import load_matrix_market, load_vector
from .problem import (
    ConstraintSystem,
    ConvexQuadratic,
    ProblemInstance,
    Rosenbrock,
    gen_experiment2_constraints,
    make_rng,
)
from .trust import SolverRun, TrConfig

__all__ = [
    "RunResult",
    "SuiteError",
    "SuiteEntry",
    "TAU_GRID",
    "SOLVERS",
    "RESULTS_HEADER",
    "performance_ratios",
    "performance_profile",
    "parse_suite",
    "build_problem",
    "solve",
    "run_solver",
    "run_suite",
    "write_results_csv",
    "write_profile_csv",
    "metric_table",
]

TAU_GRID = tuple(2.0 ** (j / 4) for j in range(-8, 25))
SOLVERS = ("l2-qr", "l2-lsqr", "sc-qr", "sc-lsqr")
RESULTS_HEADER = ["problem", "solver", "status", "iters", "time_s", "grad_inf", "feas", "projections"]


def _finite_or_none(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


@dataclass
class RunResult:
    problem: str
    solver: str
    status: str
    iterations: int
    f_final: Optional[float]
    grad_inf_norm: Optional[float]
    feasibility_norm: Optional[float]
    wall_time_seconds: float
    projection_count: int
    f_evals: int = 0
    g_evals: int = 0
    skipped_pairs: int = 0
    message: str = ""
    trace: Optional[list] = None

    @property
    def solved(self) -> bool:
        return self.status == "Converged"

    @classmethod
    def from_run(cls, run: SolverRun, problem: str, solver: str | None = None,
                 with_trace: bool = False) -> "RunResult":
        trace = None
        if with_trace:
            trace = [{k: _finite_or_none(v) for k, v in row.items()} for row in run.trace_dicts()]
        return cls(
            problem=problem,
            solver=solver or f"{run.algorithm}-{run.projector}",
            status=run.status.value,
            iterations=run.iterations,
            f_final=_finite_or_none(float(run.f)),
            grad_inf_norm=_finite_or_none(run.grad_inf_norm),
            feasibility_norm=_finite_or_none(run.feasibility_norm),
            wall_time_seconds=run.wall_time,
            projection_count=run.projection_count,
            f_evals=run.f_evals,
            g_evals=run.g_evals,
            skipped_pairs=run.skipped_pairs,
            message=run.message,
            trace=trace,
        )

    def to_json(self, **kw) -> str:
        d = asdict(self)
        if d["trace"] is None:
            del d["trace"]
        return json.dumps(d, allow_nan=False, **kw)

    @classmethod
    def from_json(cls, text: str) -> "RunResult":
        d = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown result fields: {sorted(unknown)}")
        return cls(**d)

    def csv_row(self):
        return [self.problem, self.solver, self.status, self.iterations,
                f"{self.wall_time_seconds:.6g}", _fmt(self.grad_inf_norm),
                _fmt(self.feasibility_norm), self.projection_count]


def _fmt(v):
    return "" if v is None else f"{v:.6g}"


# --- performance profiles -------------------------------------------------

def performance_ratios(metrics: dict) -> dict:
    """pi[p, s] = t[p, s] / min_{i != s} t[p, i].

    ``metrics`` maps ``(problem, solver)`` to a cost, with ``inf`` (or
    ``None``) for a failed run.  Failed runs get ``inf``; so does every run
    when a problem has a single solver, since the minimum is over an empty
    set.  If every other solver failed, a successful run gets 0.  Two zero
    costs compare as 1.
    """
    by_problem: dict = {}
    for (p, s), t in metrics.items():
        by_problem.setdefault(p, {})[s] = math.inf if t is None else float(t)
    pi = {}
    for p, row in by_problem.items():
        for s, t in row.items():
            others = [v for k, v in row.items() if k != s]
            if not others or math.isinf(t):
                pi[p, s] = math.inf
                continue
            best = min(others)
            if math.isinf(best):
                pi[p, s] = 0.0
            elif best == 0.0:
                pi[p, s] = 1.0 if t == 0.0 else math.inf
            else:
                pi[p, s] = t / best
    return pi


def performance_profile(pi: dict, taus=TAU_GRID) -> dict:
    """rho_s(tau) = #{p : pi[p, s] <= tau} / n_p for every solver."""
    problems = sorted({p for p, _ in pi})
    solvers = sorted({s for _, s in pi})
    n_p = len(problems)
    out = {}
    for s in solvers:
        vals = np.array([pi.get((p, s), math.inf) for p in problems])
        out[s] = [(float(t), float(np.count_nonzero(vals <= t)) / n_p) for t in taus]
    return out


# --- suites ---------------------------------------------------------------

class SuiteError(ValueError):
    def __init__(self, path, lineno: int, msg: str):
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {msg}")


_SUITE_KEYS = {
    "name": str, "n": int, "density": float, "seed": int, "objective": str,
    "matrix": str, "rhs": str, "x0": str, "solvers": str, "memory": int,
    "max_iter": int, "tol_grad": float, "tol_feas": float,
}


@dataclass
class SuiteEntry:
    name: str
    lineno: int = 0
    n: Optional[int] = None
    density: float = 0.1
    seed: int = 0
    objective: str = "rosenbrock"
    matrix: Optional[str] = None
    rhs: Optional[str] = None
    x0: Optional[str] = None
    solvers: tuple = SOLVERS
    memory: int = 5
    max_iter: int = 100_000
    tol_grad: float = 1e-5
    tol_feas: float = 5e-8

    def config(self) -> TrConfig:
        return TrConfig(l=self.memory, max_iter=self.max_iter, eps1=self.tol_grad,
                        feas_tol=self.tol_feas, keep_trace=False)


def parse_suite(path) -> list[SuiteEntry]:
    """One problem per line as whitespace-separated ``key=value`` pairs.

    ``#`` starts a comment.  Either ``n`` (synthetic constraints) or
    ``matrix`` must be given.  ``solvers`` is a comma list drawn from
    ``l2-qr, l2-lsqr, sc-qr, sc-lsqr``.  Relative paths are taken from the
    suite file's directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    entries, seen = [], set()
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            kv = {}
            for tok in line.split():
                key, sep, val = tok.partition("=")
                if not sep or not key or not val:
                    raise SuiteError(path, lineno, f"expected key=value, got {tok!r}")
                if key not in _SUITE_KEYS:
                    raise SuiteError(path, lineno, f"unknown key {key!r}")
                if key in kv:
                    raise SuiteError(path, lineno, f"duplicate key {key!r}")
                try:
                    kv[key] = _SUITE_KEYS[key](val)
                except ValueError:
                    raise SuiteError(path, lineno, f"bad value for {key}: {val!r}") from None
            if "name" not in kv:
                raise SuiteError(path, lineno, "missing name=")
            if kv["name"] in seen:
                raise SuiteError(path, lineno, f"duplicate problem name {kv['name']!r}")
            if ("n" in kv) == ("matrix" in kv):
                raise SuiteError(path, lineno, "give exactly one of n= or matrix=")
            if kv.get("objective", "rosenbrock") not in ("rosenbrock", "quadratic"):
                raise SuiteError(path, lineno, f"unknown objective {kv['objective']!r}")
            if "solvers" in kv:
                solvers = tuple(kv["solvers"].split(","))
                bad = [s for s in solvers if s not in SOLVERS]
                if bad:
                    raise SuiteError(path, lineno, f"unknown solver(s) {bad}")
                kv["solvers"] = solvers
            for key in ("matrix", "rhs", "x0"):
                if key in kv and not (key == "rhs" and kv[key] == "synthetic"):
                    kv[key] = os.path.join(base, kv[key])
            seen.add(kv["name"])
            entries.append(SuiteEntry(lineno=lineno, **kv))
    if not entries:
        raise SuiteError(path, 1, "suite is empty")
    return entries


def build_problem(entry: SuiteEntry) -> ProblemInstance:
    if entry.matrix is None:
        cs = gen_experiment2_constraints(entry.n, entry.density, seed=entry.seed)
    else:
        A = load_matrix_market(entry.matrix)
        if entry.rhs is None or entry.rhs == "synthetic":
            x_ref = make_rng(entry.seed).uniform(-1.0, 1.0, A.shape[1])
            b = A @ x_ref
        else:
            b = load_vector(entry.rhs)
        cs = ConstraintSystem(A, b)
    n = cs.n
    if entry.objective == "rosenbrock":
        obj = Rosenbrock(n)
    else:
        obj = ConvexQuadratic.separable(n, seed=entry.seed)
    x0 = load_vector(entry.x0) if entry.x0 else None
    return ProblemInstance(obj, cs, warm_start=x0, name=entry.name)


def solve(problem: ProblemInstance, solver: str, config: TrConfig | None = None) -> SolverRun:
    """Dispatch on a solver id such as ``"sc-lsqr"``."""
    from .trust_l2 import solve_l2
    from .trust_sc import solve_sc

    algo, _, backend = solver.partition("-")
    fns = {"l2": solve_l2, "sc": solve_sc}
    if algo not in fns or backend not in ("qr", "lsqr"):
        raise ValueError(f"unknown solver {solver!r}")
    return fns[algo](problem, config, backend)


def run_solver(problem: ProblemInstance, solver: str, config: TrConfig | None = None,
               with_trace: bool = False) -> RunResult:
    return RunResult.from_run(solve(problem, solver, config), problem.name, solver, with_trace)


def _run_entry(entry: SuiteEntry) -> list[RunResult]:
    problem = build_problem(entry)
    return [run_solver(problem, s, entry.config()) for s in entry.solvers]


def run_suite(entries, jobs: int = 1) -> list[RunResult]:
    """Run every (problem, solver) pair; order follows the suite, then solver list."""
    if jobs > 1 and len(entries) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            chunks = list(ex.map(_run_entry, entries))
    else:
        chunks = [_run_entry(e) for e in entries]
    return [r for chunk in chunks for r in chunk]


def metric_table(results, metric: str) -> dict:
    out = {}
    for r in results:
        if not r.solved:
            out[r.problem, r.solver] = math.inf
        elif metric == "iters":
            out[r.problem, r.solver] = float(r.iterations)
        elif metric == "time":
            out[r.problem, r.solver] = r.wall_time_seconds
        else:
            raise ValueError(f"unknown metric {metric!r}")
    return out


def write_results_csv(path, results) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULTS_HEADER)
        for r in results:
            w.writerow(r.csv_row())


def write_profile_csv(path, results, metrics=("iters", "time"), taus=TAU_GRID) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "solver", "tau", "rho"])
        for metric in metrics:
            prof = performance_profile(performance_ratios(metric_table(results, metric)), taus)
            for s, pts in prof.items():
                for tau, rho in pts:
                    w.writerow([metric, s, f"{tau:.6g}", f"{rho:.6g}"])
