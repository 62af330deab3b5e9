"""Dense reference computations for testing.

Everything here forms ``n x n`` matrices explicitly and is meant for
``n`` up to a few hundred.  The routes are deliberately naive and
independent of the reduced representation they are used to check.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

__all__ = [
    "DenseKktSolution",
    "bfgs_dense",
    "inverse_bfgs_dense",
    "dense_projector",
    "dense_kkt_solve",
    "dense_shifted_kkt",
    "dense_V",
    "dense_nullspace_step",
    "check_ctgc_structure",
    "brute_sc_subproblem",
    "random_rcr_instance",
    "memory_from_pairs",
]


@dataclass
class DenseKktSolution:
    s: np.ndarray
    lam: np.ndarray
    residual: float


def _dense(A):
    return A.toarray() if hasattr(A, "toarray") else np.asarray(A, dtype=float)


def bfgs_dense(S, Y, delta):
    """B from the BFGS recursion started at B0 = I / delta."""
    n = S.shape[0]
    B = np.eye(n) / delta
    for s, y in zip(S.T, Y.T):
        Bs = B @ s
        B = B - np.outer(Bs, Bs) / (s @ Bs) + np.outer(y, y) / (y @ s)
    return 0.5 * (B + B.T)


def inverse_bfgs_dense(S, Y, delta):
    """H = B^{-1} from the inverse BFGS recursion started at H0 = delta I."""
    n = S.shape[0]
    H = delta * np.eye(n)
    I = np.eye(n)
    for s, y in zip(S.T, Y.T):
        r = 1.0 / (y @ s)
        E = I - r * np.outer(s, y)
        H = E @ H @ E.T + r * np.outer(s, s)
    return 0.5 * (H + H.T)


def dense_projector(A):
    """I - A^+ A, valid for rank-deficient A as well."""
    A = _dense(A)
    return np.eye(A.shape[1]) - np.linalg.pinv(A) @ A


def dense_shifted_kkt(B, sigma, A, rhs) -> DenseKktSolution:
    """Solve [[B + sigma I, A'], [A, 0]] [s; lam] = [rhs; 0] by pivoted LU."""
    A = _dense(A)
    B = np.asarray(B, dtype=float)
    m, n = A.shape
    K = np.block([[B + sigma * np.eye(n), A.T], [A, np.zeros((m, m))]])
    r = np.concatenate([rhs, np.zeros(m)])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(K)
    if np.min(np.abs(np.diag(lu))) <= 1e-14 * np.abs(K).max():
        raise np.linalg.LinAlgError("KKT matrix is singular")
    sol = sla.lu_solve((lu, piv), r)
    res = np.linalg.norm(K @ sol - r) / max(1.0, np.linalg.norm(r))
    return DenseKktSolution(sol[:n], sol[n:], float(res))


def dense_kkt_solve(B, A, g) -> DenseKktSolution:
    return dense_shifted_kkt(B, 0.0, A, -np.asarray(g, dtype=float))


def dense_V(B_inv, A):
    """(1,1) block of the inverse KKT matrix from B^{-1} directly."""
    A = _dense(A)
    H = np.asarray(B_inv, dtype=float)
    HA = H @ A.T
    M = A @ HA
    if np.linalg.cond(M) > 1e14:
        raise np.linalg.LinAlgError("A B^{-1} A' is singular")
    return H - HA @ np.linalg.solve(M, HA.T)


def dense_nullspace_step(B, A, g):
    """Reduced-Hessian step -Zh (Zh' B Zh)^{-1} Zh' g with an orthonormal null basis."""
    Zh = sla.null_space(_dense(A))
    return -Zh @ np.linalg.solve(Zh.T @ B @ Zh, Zh.T @ g)


def check_ctgc_structure(S, Y, delta, A) -> dict:
    """Materialize C'GC for the inverse L-BFGS matrix and compare to its simplified form.

    ``C = A J W`` and ``G = (A H A')^{-1}`` with ``J = [S Y]`` and ``W`` the
    compact middle matrix of ``H = B^{-1}``.  Expects ``A S = 0``.
    Returns the largest off-(1,1) block entry and the (1,1) discrepancy, both
    relative to ``max(1, max|C'GC|)``.
    """
    A = _dense(A)
    k = S.shape[1]
    if k == 0:
        return {"off_block": 0.0, "block11_error": 0.0, "scale": 0.0}
    StY = S.T @ Y
    D = np.diag(np.diag(StY))
    T = np.triu(StY)
    Tinv = sla.solve_triangular(T, np.eye(k))
    W = np.block([[Tinv.T @ (D + delta * Y.T @ Y) @ Tinv, -delta * Tinv.T],
                  [-delta * Tinv, np.zeros((k, k))]])
    J = np.hstack([S, Y])
    H = inverse_bfgs_dense(S, Y, delta)
    C = A @ J @ W
    G = np.linalg.inv(A @ H @ A.T)
    CGC = C.T @ G @ C
    AY = A @ Y
    ref11 = delta * Tinv.T @ AY.T @ np.linalg.solve(A @ A.T, AY) @ Tinv
    scale = max(1.0, np.abs(CGC).max())
    off = max(np.abs(CGC[:k, k:]).max(), np.abs(CGC[k:, :k]).max(), np.abs(CGC[k:, k:]).max())
    return {
        "off_block": float(off / scale),
        "block11_error": float(np.abs(CGC[:k, :k] - ref11).max() / scale),
        "scale": float(scale),
    }


def _min_1d(fun, lo, hi, npts=2001):
    """Grid search on [lo, hi] followed by bounded Brent polishing."""
    if hi <= lo:
        return lo, fun(lo)
    grid = np.linspace(lo, hi, npts)
    vals = np.array([fun(t) for t in grid])
    j = int(np.argmin(vals))
    a, b = grid[max(j - 1, 0)], grid[min(j + 1, npts - 1)]
    res = minimize_scalar(fun, bounds=(a, b), method="bounded",
                          options={"xatol": 1e-14 * max(1.0, abs(hi - lo))})
    cands = [(grid[j], vals[j]), (res.x, res.fun), (lo, fun(lo)), (hi, fun(hi))]
    return min(cands, key=lambda c: c[1])


def brute_sc_subproblem(u, Lambda2, xi, delta, Delta):
    """Minimize the decoupled shape-changing subproblem by 1-D searches.

    Objective: sum_i [u_i v_i + v_i^2 / (2 (delta + lam_i))] over |v_i| <= Delta
    plus min over 0 <= t <= Delta of [-t xi + t^2 / (2 delta)] (the ball part
    along -U3'g).  Returns ``(value, v2, t)``.
    """
    u = np.asarray(u, dtype=float)
    lam = np.asarray(Lambda2, dtype=float)
    v2 = np.empty_like(u)
    total = 0.0
    for i, (ui, li) in enumerate(zip(u, lam)):
        c = delta + li
        v, val = _min_1d(lambda v: ui * v + v * v / (2 * c), -Delta, Delta)
        v2[i] = v
        total += val
    t, val3 = _min_1d(lambda t: -t * xi + t * t / (2 * delta), 0.0, Delta)
    return total + val3, v2, t


def random_rcr_instance(rng, n, m, k, *, cond_scale=1.0):
    """Feasible step pairs for testing the reduced representation.

    Returns ``(A, S, Y, delta, Btrue)`` where the columns of ``S`` lie in
    null(A) and ``y_i = Btrue s_i`` for an SPD ``Btrue``, so every pair has
    positive curvature.  ``A`` is a dense ``m x n`` Gaussian matrix.
    """
    A = rng.standard_normal((m, n))
    P = dense_projector(A)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    Btrue = (Q * rng.uniform(0.5, 2.0 * cond_scale, n)) @ Q.T
    Btrue = 0.5 * (Btrue + Btrue.T)
    S = P @ rng.standard_normal((n, k))
    Y = Btrue @ S
    delta = float(S[:, -1] @ Y[:, -1] / (Y[:, -1] @ Y[:, -1])) if k else 1.0
    return A, S, Y, delta, Btrue


def memory_from_pairs(S, Y, A, l=5):
    """PairMemory filled with the columns of ``S`` and ``P Y`` (dense projection)."""
    from .rcr import PairMemory

    P = dense_projector(A)
    mem = PairMemory(S.shape[0], l)
    for s, y in zip(S.T, Y.T):
        mem.update(s, P @ y, y)
    return mem, P
