"""L-BFGS trust-region method with the Euclidean trust-region norm.

The equality-constrained step ``-V g`` is tried first.  When it is too long
or rejected, the shift ``sigma`` placing ``s(sigma) = -V(sigma) g`` on the
boundary is found by Newton's method on ``1/||s(sigma)|| - 1/Delta``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .rcr import (
    CurvatureError,
    PairMemory,
    SingularMiddleError,
    apply_V,
    apply_V_sigma,
    assemble_N_sigma,
    init_memory,
)
from .trust import (
    Status,
    TrConfig,
    _Run,
    inf_norm,
    init_step,
    middle_matrix,
    reduction_ratio,
)

__all__ = ["ZeroStepError", "NewtonResult", "equality_step", "secular_phi", "newton_sigma", "solve_l2"]

log = logging.getLogger(__name__)


class ZeroStepError(ArithmeticError):
    """s(sigma) vanished, so the secular function is undefined (g is stationary)."""


def equality_step(mem: PairMemory, g, gP, N=None) -> np.ndarray:
    if N is None:
        N = middle_matrix(mem)
    return -apply_V(mem, N, g, gP)


def secular_phi(mem: PairMemory, g, gP, sigma: float, Delta: float):
    """Return ``(phi, phi', s)`` at ``sigma``.

    ``s' = -V(sigma) s`` comes from differentiating the shifted KKT system;
    since ``s`` already lies in null(A) it is its own projection.
    """
    Ns = assemble_N_sigma(mem, sigma)
    s = -apply_V_sigma(mem, Ns, Ns.tau, g, gP)
    ns = float(np.linalg.norm(s))
    if ns == 0.0:
        raise ZeroStepError("s(sigma) = 0")
    ds = -apply_V_sigma(mem, Ns, Ns.tau, s, s)
    phi = 1.0 / ns - 1.0 / Delta
    dphi = -float(s @ ds) / ns**3
    return phi, dphi, s


@dataclass
class NewtonResult:
    sigma: float
    s: np.ndarray
    phi: float
    iterations: int
    converged: bool


def _phi_safe(mem, g, gP, sigma, Delta):
    for _ in range(5):
        try:
            return sigma, secular_phi(mem, g, gP, sigma, Delta)
        except SingularMiddleError:
            sigma = sigma + 1e-8 * (1.0 + sigma)
    return sigma, secular_phi(mem, g, gP, sigma, Delta)


def newton_sigma(mem: PairMemory, g, gP, Delta: float, eps2: float | None = None,
                 i_max: int = 10) -> NewtonResult:
    """Newton's method on the secular equation from sigma = 0.

    A negative iterate is replaced by half the previous one.  If ``i_max``
    is hit the last iterate is returned with ``converged=False``.
    """
    if eps2 is None:
        eps2 = 1e-5 / Delta
    sigma, (phi, dphi, s) = _phi_safe(mem, g, gP, 0.0, Delta)
    i = 0
    while abs(phi) > eps2 and i < i_max:
        if dphi <= 0:  # not expected for positive definite V(sigma)
            break
        trial = sigma - phi / dphi
        sigma = trial if trial >= 0 else 0.5 * sigma
        sigma, (phi, dphi, s) = _phi_safe(mem, g, gP, sigma, Delta)
        i += 1
    ok = abs(phi) <= eps2
    if not ok:
        log.debug("secular Newton stopped at i=%d with |phi|=%.2e", i, abs(phi))
    return NewtonResult(sigma, s, phi, i, ok)


def solve_l2(problem, config: TrConfig | None = None, projector="qr", x0=None):
    """Minimize ``problem.objective`` over ``A x = b`` with the l2 trust region.

    ``projector`` is a backend name or a ready :class:`~rcrtr.projection.Projector`.
    Returns a :class:`~rcrtr.trust.SolverRun`.
    """
    run = _Run(problem, config, projector, "l2", x0)
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
        sE = -apply_V(mem, N, g, gP)
        nE = float(np.linalg.norm(sE))
        s, ns, sigma, rho, inner = sE, nE, 0.0, 0.0, 0
        if nE <= Delta:
            f_new = ev.f_trial(x + s)
            rho = reduction_ratio(mem, f, f_new, g, s, require_decrease=False)
            if rho <= cfg.c1:
                Delta = min(cfg.c3 * nE, cfg.c4 * Delta)
        while rho <= cfg.c1:
            if Delta < 1e-14 * (1.0 + np.linalg.norm(x)) or nE == 0.0:
                return run.finish(Status.STALLED, x, f, gP, mem,
                                  message=f"radius collapsed to {Delta:.2e}")
            if nE > Delta:
                nr = newton_sigma(mem, g, gP, Delta, cfg.secular_tol(Delta), cfg.i_max)
                s, sigma = nr.s, nr.sigma
            else:
                s, sigma = sE, 0.0
            ns = float(np.linalg.norm(s))
            f_new = ev.f_trial(x + s)
            rho = reduction_ratio(mem, f, f_new, g, s, require_decrease=True)
            if rho <= cfg.c2:
                Delta = min(cfg.c3 * ns, cfg.c4 * Delta)
            inner += 1

        x = x + s
        f = f_new
        if cfg.c5 * Delta <= ns and cfg.c6 <= rho:
            Delta *= cfg.c7
        g_new = ev.g(x)
        gP_new = proj.project(g_new)
        stored = mem.update(s, gP_new - gP, g_new - g)
        g, gP = g_new, gP_new
        run.k += 1
        run.record(f=f, grad_inf=inf_norm(gP), Delta=Delta, sigma=sigma, rho=rho,
                   step_norm=ns, inner=inner, pair_stored=stored, feas=run.feas(x))
    return run.finish(Status.CONVERGED, x, f, gP, mem)
