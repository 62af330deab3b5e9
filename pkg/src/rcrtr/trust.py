"""Shared pieces of the two trust-region solvers: settings, run records,
the backtracking initialization and the actual/predicted reduction ratio."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .problem import ProblemInstance
from .projection import Projector, build_projector
from .rcr import CURVATURE_FLOOR, PairMemory, assemble_N, model_curvature

__all__ = [
    "Status",
    "TrConfig",
    "TraceRow",
    "SolverRun",
    "InitStep",
    "NonFiniteError",
    "inf_norm",
    "init_step",
    "reduction_ratio",
    "middle_matrix",
]


class Status(str, Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    LINE_SEARCH_FAIL = "LineSearchFail"
    STALLED = "StalledRadius"
    INFEASIBLE = "Infeasible"


class NonFiniteError(FloatingPointError):
    pass


@dataclass
class TrConfig:
    c1: float = float(np.finfo(float).eps)
    c2: float = 0.75
    c3: float = 0.5
    c4: float = 0.25
    c5: float = 0.8
    c6: float = 0.25
    c7: float = 2.0
    eps1: float = 1e-5
    # secular-equation tolerance; None means 1e-5 / Delta
    eps2: Optional[float] = None
    i_max: int = 10
    max_iter: int = 100_000
    l: int = 5
    feas_tol: float = 5e-8
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 30
    keep_trace: bool = True

    def __post_init__(self):
        if self.c1 <= 0:
            raise ValueError("c1 must be positive")
        for name in ("c2", "c3", "c4", "c5", "c6"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.c7 <= 1:
            raise ValueError("c7 must exceed 1")
        if self.eps1 <= 0 or (self.eps2 is not None and self.eps2 <= 0):
            raise ValueError("tolerances must be positive")
        if self.i_max < 1 or self.l < 1:
            raise ValueError("i_max and l must be positive")

    def secular_tol(self, Delta: float) -> float:
        return self.eps2 if self.eps2 is not None else 1e-5 / Delta


@dataclass
class TraceRow:
    k: int
    f: float
    grad_inf: float
    Delta: float
    sigma: float
    rho: float
    step_norm: float
    inner: int
    projections: int
    pair_stored: bool
    feas: float


@dataclass
class SolverRun:
    x: np.ndarray
    f: float
    status: Status
    iterations: int
    grad_inf_norm: float
    feasibility_norm: float
    projection_count: int
    f_evals: int
    g_evals: int
    skipped_pairs: int = 0
    wall_time: float = 0.0
    algorithm: str = ""
    projector: str = ""
    trace: list = field(default_factory=list)
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == Status.CONVERGED

    def trace_dicts(self):
        return [asdict(r) for r in self.trace]


@dataclass
class InitStep:
    x: np.ndarray
    f: float
    g: np.ndarray
    gP: np.ndarray
    s: np.ndarray
    z: np.ndarray
    y: np.ndarray
    Delta: float
    alpha: float


class _Evaluator:
    """Counts objective calls and rejects non-finite output."""

    def __init__(self, objective):
        self.obj = objective
        self.nf = 0
        self.ng = 0

    def f(self, x):
        self.nf += 1
        v = float(self.obj.fun(x))
        if not np.isfinite(v):
            raise NonFiniteError(f"objective returned {v} at iterate with ||x|| = {np.linalg.norm(x):.3e}")
        return v

    def f_trial(self, x):
        """f at a trial point; non-finite values count as +inf so the step is rejected."""
        self.nf += 1
        v = float(self.obj.fun(x))
        return v if np.isfinite(v) else np.inf

    def g(self, x):
        self.ng += 1
        v = np.asarray(self.obj.grad(x), dtype=float)
        if not np.all(np.isfinite(v)):
            raise NonFiniteError("gradient has non-finite entries")
        return v


def init_step(ev, proj: Projector, x0, f0, g0, gP0, config: TrConfig) -> Optional[InitStep]:
    """Backtracking along the normalized projected steepest-descent direction.

    Starts at ``alpha = 1`` and halves until the Armijo condition holds and
    the resulting pair has positive curvature.  Returns ``None`` if no
    ``alpha`` works within ``config.max_backtracks`` halvings.
    """
    ev = ev if isinstance(ev, _Evaluator) else _Evaluator(ev)
    nrm = float(np.linalg.norm(gP0))
    if nrm == 0.0:
        raise ValueError("projected gradient is zero; nothing to initialize")
    d = -gP0 / nrm
    alpha = 1.0
    for _ in range(config.max_backtracks + 1):
        x1 = x0 + alpha * d
        f1 = ev.f_trial(x1)
        if f1 <= f0 - config.armijo_c * alpha * nrm:
            g1 = ev.g(x1)
            gP1 = proj.project(g1)
            s, z = x1 - x0, gP1 - gP0
            if s @ z > CURVATURE_FLOOR * np.linalg.norm(s) * np.linalg.norm(z):
                return InitStep(x1, f1, g1, gP1, s, z, g1 - g0, float(np.linalg.norm(s)), alpha)
        alpha *= config.backtrack
    return None


def inf_norm(v) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def reduction_ratio(mem: PairMemory, f, f_trial, g, s, require_decrease: bool) -> float:
    """(f(x) - f(x+s)) / (q(0) - q(s)), or 0 when the model predicts no decrease.

    With ``require_decrease`` the ratio is also 0 unless f actually drops.
    """
    ared = f - f_trial
    if require_decrease and not ared > 0:
        return 0.0
    pred = -(float(g @ s) + 0.5 * model_curvature(mem, s))
    if not pred > 0:
        return 0.0
    return ared / pred


def middle_matrix(mem: PairMemory):
    """Unshifted N, dropping the oldest pairs while T is ill-conditioned."""
    N = assemble_N(mem)
    while N.ill_conditioned and mem.k > 0:
        mem.drop_oldest()
        N = assemble_N(mem)
    return N


class _Run:
    """Bookkeeping shared by the solver loops."""

    def __init__(self, problem: ProblemInstance, config, projector, algorithm, x0=None):
        self.t0 = time.perf_counter()
        self.problem = problem
        self.config = config or TrConfig()
        cs = problem.constraints
        if isinstance(projector, Projector):
            self.proj = projector
        else:
            self.proj = build_projector(cs.A, projector or "qr")
        if cs.rank_estimate is None:
            cs.rank_estimate = self.proj.rank_estimate
        self.algorithm = algorithm
        self.ev = _Evaluator(problem.objective)
        self.proj0 = self.proj.projection_count
        self.x = problem.initial_point(self.proj) if x0 is None else np.asarray(x0, dtype=float)
        self.trace = []
        self.k = 0

    def feas(self, x):
        return self.problem.constraints.residual_norm(x)

    def record(self, **kw):
        if self.config.keep_trace:
            kw["projections"] = self.proj.projection_count - self.proj0
            self.trace.append(TraceRow(k=self.k, **kw))

    def finish(self, status, x, f, gP, mem=None, message=""):
        feas = self.feas(x)
        ginf = inf_norm(gP)
        if status == Status.CONVERGED and feas >= self.config.feas_tol:
            status = Status.INFEASIBLE
            message = message or f"gradient test met but ||Ax-b|| = {feas:.2e}"
        return SolverRun(
            x=x, f=f, status=status, iterations=self.k, grad_inf_norm=ginf,
            feasibility_norm=feas,
            projection_count=self.proj.projection_count - self.proj0,
            f_evals=self.ev.nf, g_evals=self.ev.ng,
            skipped_pairs=mem.skipped if mem is not None else 0,
            wall_time=time.perf_counter() - self.t0,
            algorithm=self.algorithm, projector=self.proj.backend,
            trace=self.trace, message=message,
        )
