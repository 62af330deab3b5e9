"""L-BFGS trust-region method in the shape-changing infinity norm.

A thin Cholesky factor ``R2`` of the Gram matrix of ``[S Z]`` and a small
symmetric eigendecomposition give ``V = U2 (delta I + Lambda2) U2' +
delta U3 U3'`` on null(A) without forming ``U3``.  In those coordinates the
subproblem splits into independent 1-D problems and a single ball problem,
so the step is available in closed form for every radius.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .projection import QRProjector
from .rcr import CurvatureError, PairMemory, apply_V, init_memory
from .trust import Status, TrConfig, _Run, inf_norm, init_step, middle_matrix, reduction_ratio

__all__ = [
    "GramBreakdown",
    "EigenFactors",
    "gram_matrix",
    "gram_cholesky",
    "small_eig",
    "compute_u_xi",
    "sc_subproblem",
    "sc_step",
    "sc_norm",
    "eigen_factors",
    "solve_sc",
]

# squared pivot relative to the Gram diagonal below which [S Z] is treated as rank deficient
GRAM_PIVOT_TOL = 1e-8


class GramBreakdown(np.linalg.LinAlgError):
    pass


@dataclass
class EigenFactors:
    SZ: np.ndarray
    R2: np.ndarray
    P2: np.ndarray
    Lambda2: np.ndarray
    u: np.ndarray
    xi: float
    delta: float

    @property
    def U2(self):
        """Orthonormal basis of span[S Z] (materialized; tests only)."""
        return self.SZ @ sla.solve_triangular(self.R2, self.P2)


def gram_matrix(mem: PairMemory) -> np.ndarray:
    return np.block([[mem.StS, mem.StZ], [mem.StZ.T, mem.ZtZ]])


def gram_cholesky(mem: PairMemory) -> np.ndarray:
    """Upper R2 with R2'R2 = [[S'S, S'Z], [Z'S, Z'Z]]; raises GramBreakdown."""
    G = gram_matrix(mem)
    if G.size == 0:
        return np.zeros((0, 0))
    try:
        R2 = np.linalg.cholesky(G).T
    except np.linalg.LinAlgError:
        raise GramBreakdown("Gram matrix of [S Z] is not positive definite") from None
    d = np.diag(G)
    if np.any(np.diag(R2) ** 2 <= GRAM_PIVOT_TOL * d):
        raise GramBreakdown("[S Z] is numerically rank deficient")
    return R2


def small_eig(R2, N):
    M = R2 @ N @ R2.T
    w, P2 = np.linalg.eigh(0.5 * (M + M.T))
    return P2, w


def compute_u_xi(mem: PairMemory, R2, P2, g, gP):
    gPn2 = float(gP @ gP)
    if mem.k == 0:
        return np.zeros(0), np.sqrt(gPn2)
    u = P2.T @ sla.solve_triangular(R2, mem.SZ.T @ g, trans="T")
    # cancellation can push the difference slightly below zero
    xi = float(np.sqrt(max(0.0, gPn2 - float(u @ u))))
    return u, xi


def sc_subproblem(u, Lambda2, xi: float, delta: float, Delta: float):
    """Closed-form minimizer of the decoupled subproblem; returns ``(v2, beta)``."""
    u = np.asarray(u, dtype=float)
    c = delta + np.asarray(Lambda2, dtype=float)
    if np.any(c <= 0):
        raise ValueError("delta + Lambda2 must be positive")
    v2 = -c * u
    clip = np.abs(v2) > Delta
    v2[clip] = -Delta * np.sign(u[clip])
    beta = -delta if delta * xi <= Delta else -Delta / xi
    return v2, beta


def sc_step(mem: PairMemory, R2, P2, v2, beta: float, u, gP) -> np.ndarray:
    s = beta * np.asarray(gP, dtype=float)
    if mem.k:
        s = s + mem.SZ @ sla.solve_triangular(R2, P2 @ (v2 - beta * u))
    return s


def sc_norm(s, factors: EigenFactors, proj) -> float:
    """max(||[Q1 U2]'s||_inf, ||U3's||_2), spending one projection.

    With an LSQR projector ``||Q1's||_inf`` is replaced by ``||s - Ps||_2``,
    an upper bound that vanishes for feasible steps.
    """
    s = np.asarray(s, dtype=float)
    sP = proj.project(s)
    if isinstance(proj, QRProjector):
        q1 = float(np.max(np.abs(proj.q1t(s)), initial=0.0))
    else:
        q1 = float(np.linalg.norm(s - sP))
    if factors.SZ.shape[1]:
        w = factors.P2.T @ sla.solve_triangular(factors.R2, factors.SZ.T @ s, trans="T")
    else:
        w = np.zeros(0)
    u2 = float(np.max(np.abs(w), initial=0.0))
    u3 = float(np.sqrt(max(0.0, float(sP @ sP) - float(w @ w))))
    return max(q1, u2, u3)


def eigen_factors(mem: PairMemory, N, g, gP) -> EigenFactors:
    """Factor ``mem`` as is; GramBreakdown propagates to the caller."""
    if not isinstance(N, np.ndarray):
        N = N.N
    R2 = gram_cholesky(mem)
    P2, lam = small_eig(R2, N) if mem.k else (np.zeros((0, 0)), np.zeros(0))
    u, xi = compute_u_xi(mem, R2, P2, g, gP)
    return EigenFactors(mem.SZ, R2, P2, lam, u, xi, mem.delta)


def _robust_factors(mem: PairMemory, g, gP):
    # drop the oldest pair until both T and the Gram matrix are usable
    while True:
        N = middle_matrix(mem)
        try:
            return eigen_factors(mem, N, g, gP)
        except GramBreakdown:
            mem.drop_oldest()


def solve_sc(problem, config: TrConfig | None = None, projector="qr", x0=None):
    """Shape-changing trust-region counterpart of :func:`rcrtr.trust_l2.solve_l2`."""
    run = _Run(problem, config, projector, "sc", x0)
    cfg, proj, ev = run.config, run.proj, run.ev
    x = run.x
    f, g = ev.f(x), ev.g(x)
    gP = proj.project(g)
    run.record(f=f, grad_inf=inf_norm(gP), Delta=np.nan, sigma=0.0, rho=np.nan,
               step_norm=0.0, inner=0, pair_stored=False, feas=run.feas(x))
    if inf_norm(gP) < cfg.eps1:
        return run.finish(Status.CONVERGED, x, f, gP)

    it = init_step(ev, proj, x, f, g, gP, cfg)
    if it is None:
        return run.finish(Status.LINE_SEARCH_FAIL, x, f, gP, message="initial backtracking failed")
    x, f, g, gP, Delta = it.x, it.f, it.g, it.gP, it.Delta
    try:
        mem = init_memory(it.s, it.z, it.y, cfg.l)
    except CurvatureError as e:
        return run.finish(Status.LINE_SEARCH_FAIL, x, f, gP, message=str(e))
    run.k = 1
    run.record(f=f, grad_inf=inf_norm(gP), Delta=Delta, sigma=0.0, rho=np.nan,
               step_norm=float(np.linalg.norm(it.s)), inner=0, pair_stored=True, feas=run.feas(x))

    while inf_norm(gP) >= cfg.eps1:
        if run.k >= cfg.max_iter:
            return run.finish(Status.MAX_ITER, x, f, gP, mem)
        N = middle_matrix(mem)
        s = -apply_V(mem, N, g, gP)
        snorm = float(np.linalg.norm(s))
        rho, inner = 0.0, 0
        if snorm <= Delta:
            f_new = ev.f_trial(x + s)
            rho = reduction_ratio(mem, f, f_new, g, s, require_decrease=False)
        if rho <= cfg.c1:
            F = _robust_factors(mem, g, gP)
            while rho <= cfg.c1:
                if Delta < 1e-14 * (1.0 + np.linalg.norm(x)):
                    return run.finish(Status.STALLED, x, f, gP, mem,
                                      message=f"radius collapsed to {Delta:.2e}")
                v2, beta = sc_subproblem(F.u, F.Lambda2, F.xi, mem.delta, Delta)
                s = sc_step(mem, F.R2, F.P2, v2, beta, F.u, gP)
                # s lies in null(A), so its U-norm needs no projection
                snorm = max(float(np.max(np.abs(v2), initial=0.0)), abs(beta) * F.xi)
                f_new = ev.f_trial(x + s)
                rho = reduction_ratio(mem, f, f_new, g, s, require_decrease=True)
                if rho <= cfg.c2:
                    Delta = min(cfg.c3 * snorm, cfg.c4 * Delta)
                inner += 1

        x = x + s
        f = f_new
        if cfg.c5 * Delta <= snorm and cfg.c6 <= rho:
            Delta *= cfg.c7
        g_new = ev.g(x)
        gP_new = proj.project(g_new)
        stored = mem.update(s, gP_new - gP, g_new - g)
        g, gP = g_new, gP_new
        run.k += 1
        run.record(f=f, grad_inf=inf_norm(gP), Delta=Delta, sigma=0.0, rho=rho,
                   step_norm=snorm, inner=inner, pair_stored=stored, feas=run.feas(x))
    return run.finish(Status.CONVERGED, x, f, gP, mem)
