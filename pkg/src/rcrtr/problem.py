"""Objectives over sparse equality constraints, with feasible starting points.

A problem is ``minimize f(x) subject to A x = b`` with ``A`` a sparse
``m x n`` matrix (``m < n``).  Constraint matrices are held as
``scipy.sparse.csr_matrix``; the coordinate-triplet view required for file
exchange lives in :mod:`rcrtr.mmio`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np
import scipy.sparse as sp

__all__ = [
    "FeasibilityError",
    "ConstraintSystem",
    "Objective",
    "Rosenbrock",
    "ConvexQuadratic",
    "ProblemInstance",
    "rosenbrock",
    "check_gradient",
    "min_norm_feasible",
    "restore_feasibility",
    "make_rng",
    "gen_experiment2_constraints",
    "feasibility_tolerance",
]


class FeasibilityError(ValueError):
    """Raised when ``A x = b`` has no solution (``b`` outside range(A))."""

    def __init__(self, residual: float, msg: str | None = None):
        self.residual = residual
        super().__init__(msg or f"inconsistent constraints: ||Ax - b|| = {residual:.3e}")


def make_rng(seed=None) -> np.random.Generator:
    """Seedable 64-bit generator (PCG64) used for every random fixture."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class ConstraintSystem:
    A: sp.csr_matrix
    b: np.ndarray
    rank_estimate: Optional[int] = None

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.A.sum_duplicates()
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.b.shape[0] != self.A.shape[0]:
            raise ValueError(f"b has length {self.b.shape[0]}, A has {self.A.shape[0]} rows")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def residual_norm(self, x) -> float:
        return float(np.linalg.norm(self.A @ x - self.b))


def feasibility_tolerance(b) -> float:
    return 1e-10 * (1.0 + float(np.linalg.norm(b)))


class Objective(Protocol):
    n: int

    def fun(self, x: np.ndarray) -> float: ...

    def grad(self, x: np.ndarray) -> np.ndarray: ...


def rosenbrock(x):
    """Return ``(f, g)`` for sum_i (x[2i] - x[2i-1])^2 + (1 - x[2i-1])^2.

    Indices are 1-based in the formula; odd entries are ``x[0::2]`` here.
    There is no inner square, so the function is a convex quadratic.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 2 or n % 2:
        raise ValueError(f"rosenbrock needs an even dimension >= 2, got {n}")
    odd, even = x[0::2], x[1::2]
    d = even - odd
    e = 1.0 - odd
    f = float(d @ d + e @ e)
    g = np.empty_like(x)
    g[0::2] = -2.0 * d - 2.0 * e
    g[1::2] = 2.0 * d
    return f, g


class Rosenbrock:
    def __init__(self, n: int):
        if n < 2 or n % 2:
            raise ValueError(f"rosenbrock needs an even dimension >= 2, got {n}")
        self.n = n

    def fun(self, x):
        return rosenbrock(x)[0]

    def grad(self, x):
        return rosenbrock(x)[1]


class ConvexQuadratic:
    """f(x) = 1/2 x'Hx + c'x with symmetric positive definite H (dense or sparse)."""

    def __init__(self, H, c):
        self.H = H
        self.c = np.asarray(c, dtype=float)
        self.n = self.c.shape[0]

    @classmethod
    def random(cls, n: int, seed=None, cond: float = 10.0) -> "ConvexQuadratic":
        """Random dense SPD Hessian with eigenvalues spread over [1, cond]."""
        rng = make_rng(seed)
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        eig = np.geomspace(1.0, cond, n)
        H = (Q * eig) @ Q.T
        return cls(0.5 * (H + H.T), rng.standard_normal(n))

    @classmethod
    def separable(cls, n: int, seed=None) -> "ConvexQuadratic":
        """Diagonal Hessian with entries in [1, 10]; scales to large n."""
        rng = make_rng(seed)
        return cls(sp.diags(rng.uniform(1.0, 10.0, n)), rng.standard_normal(n))

    def fun(self, x):
        return float(0.5 * x @ (self.H @ x) + self.c @ x)

    def grad(self, x):
        return np.asarray(self.H @ x).ravel() + self.c


def check_gradient(obj, x, rel_tol: float = 1e-5) -> float:
    """Max relative error between ``obj.grad`` and central differences.

    Step per coordinate is ``1e-6 * (1 + |x_i|)``.  Raises ``AssertionError``
    above ``rel_tol``; returns the observed error otherwise.
    """
    x = np.asarray(x, dtype=float)
    g = obj.grad(x)
    fd = np.empty_like(x)
    for i in range(x.shape[0]):
        h = 1e-6 * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fd[i] = (obj.fun(xp) - obj.fun(xm)) / (2 * h)
    err = float(np.linalg.norm(fd - g) / max(1.0, np.linalg.norm(g)))
    if err > rel_tol:
        raise AssertionError(f"gradient check failed: relative error {err:.2e}")
    return err


@dataclass
class ProblemInstance:
    objective: Objective
    constraints: ConstraintSystem
    warm_start: Optional[np.ndarray] = None
    name: str = "problem"

    def __post_init__(self):
        n = self.constraints.n
        if getattr(self.objective, "n", n) != n:
            raise ValueError("objective and constraint dimensions differ")
        if self.warm_start is not None:
            self.warm_start = np.asarray(self.warm_start, dtype=float)
            if self.warm_start.shape != (n,):
                raise ValueError("warm start has the wrong length")

    def initial_point(self, projector) -> np.ndarray:
        """Feasible start: repaired warm start, or the minimum-norm solution."""
        if self.warm_start is None:
            return min_norm_feasible(self.constraints, projector)
        return restore_feasibility(self.constraints, self.warm_start, projector)


def min_norm_feasible(cs: ConstraintSystem, proj) -> np.ndarray:
    """argmin ||x|| subject to A x = b, using the projector's factors."""
    x0 = proj.min_norm_solve(cs.b)
    res = cs.residual_norm(x0)
    if res > feasibility_tolerance(cs.b):
        raise FeasibilityError(res)
    return x0


def restore_feasibility(cs: ConstraintSystem, x_hat, proj) -> np.ndarray:
    """x_hat plus the minimum-norm correction p with A p = b - A x_hat."""
    x_hat = np.asarray(x_hat, dtype=float)
    r = cs.b - cs.A @ x_hat
    if np.linalg.norm(r) <= feasibility_tolerance(cs.b):
        return x_hat.copy()
    x0 = x_hat + proj.min_norm_solve(r)
    res = cs.residual_norm(x0)
    if res > feasibility_tolerance(cs.b):
        raise FeasibilityError(res)
    return x0


def gen_experiment2_constraints(n: int, density: float = 0.1, seed=None) -> ConstraintSystem:
    """Random sparse ``A`` with ``m = ceil(n/4)`` rows and uniform (0, 1) entries.

    The right-hand side is ``b = A x_ref`` with ``x_ref`` uniform in [-1, 1]^n,
    so the system is consistent whatever the rank of ``A``.
    """
    if n < 4:
        raise ValueError("n must be at least 4")
    rng = make_rng(seed)
    m = math.ceil(0.25 * n)
    A = sp.random(m, n, density=density, format="csr", random_state=rng,
                  data_rvs=lambda k: rng.uniform(0.0, 1.0, k))
    x_ref = rng.uniform(-1.0, 1.0, n)
    return ConstraintSystem(A, A @ x_ref)
