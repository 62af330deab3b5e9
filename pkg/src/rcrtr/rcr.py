"""Reduced compact representation of the projected inverse-KKT block.

For the L-BFGS matrix ``B`` built from step pairs ``(s_i, y_i)`` and
initial scaling ``delta`` (``B_0^{-1} = delta I``), the (1,1) block of the
inverse of ``[[B + sigma I, A'], [A, 0]]`` is

    V(sigma) = P / tau + [S Z] N(sigma) [S Z]',     tau = 1/delta + sigma,

with ``Z = P Y``.  Only ``[S Z]`` and a handful of ``k x k`` Gram blocks
are stored, so no solve with ``AA'`` is needed beyond the single projection
of each new gradient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

__all__ = [
    "CURVATURE_FLOOR",
    "CurvatureError",
    "SingularMiddleError",
    "PairMemory",
    "MiddleMatrix",
    "col_update",
    "prod_update",
    "init_memory",
    "update_memory",
    "assemble_N",
    "assemble_N_sigma",
    "apply_V",
    "apply_V_sigma",
    "model_curvature",
]

CURVATURE_FLOOR = 1e-8
T_COND_LIMIT = 1e12


class CurvatureError(ValueError):
    """A pair violates s'z > floor * ||s|| ||z|| and cannot start the memory."""


class SingularMiddleError(np.linalg.LinAlgError):
    def __init__(self, sigma: float):
        self.sigma = sigma
        super().__init__(f"middle matrix singular at sigma={sigma!r}")


def col_update(M, v, l: int):
    """Append column ``v``; drop the first column once ``l`` are held."""
    v = np.asarray(v)
    if M is None or M.shape[1] == 0:
        return v.reshape(-1, 1).copy()
    if M.shape[1] >= l:
        M = M[:, 1:]
    return np.column_stack([M, v])


def prod_update(G, A_old, B_old, a, b, l: int):
    """Update the stored product ``A_old' B_old`` to ``A_new' B_new``.

    ``A_new = col_update(A_old, a)`` and likewise for ``B``.  Any of the four
    factors may be ``None`` to mean zero, which is how the diagonal ``D``,
    the upper triangle ``T`` and the strict lower triangle ``L`` are kept.
    Costs two products of an ``n x k`` block with an ``n`` vector.
    """
    k = G.shape[0]
    if k >= l:
        G = G[1:, 1:]
        A_old = None if A_old is None else A_old[:, 1:]
        B_old = None if B_old is None else B_old[:, 1:]
    kk = G.shape[0]
    col = A_old.T @ b if (A_old is not None and b is not None and kk) else np.zeros(kk)
    row = a @ B_old if (a is not None and B_old is not None and kk) else np.zeros(kk)
    corner = a @ b if (a is not None and b is not None) else 0.0
    return np.block([[G, np.reshape(col, (kk, 1))],
                     [np.reshape(row, (1, kk)), np.array([[corner]])]])


class PairMemory:
    """Limited-memory storage of steps ``S`` and projected differences ``Z``.

    Keeps ``D = diag(S'Z)``, ``T = triu(S'Z)``, ``L = tril(S'Z, -1)`` and the
    Gram blocks ``Z'Z``, ``S'S``, ``S'Z`` up to date with column and product
    updates.  ``delta`` is the scaling ``s'z / y'y`` of the newest pair.
    """

    def __init__(self, n: int, l: int = 5, delta: float = 1.0):
        if l < 1:
            raise ValueError("memory must be at least 1")
        self.n = n
        self.l = l
        self.delta = float(delta)
        self.S = np.zeros((n, 0))
        self.Z = np.zeros((n, 0))
        self.D = np.zeros((0, 0))
        self.T = np.zeros((0, 0))
        self.L = np.zeros((0, 0))
        self.ZtZ = np.zeros((0, 0))
        self.StS = np.zeros((0, 0))
        self.StZ = np.zeros((0, 0))
        self.skipped = 0

    @property
    def k(self) -> int:
        return self.S.shape[1]

    @property
    def SZ(self) -> np.ndarray:
        return np.hstack([self.S, self.Z])

    def copy(self) -> "PairMemory":
        new = PairMemory(self.n, self.l, self.delta)
        for name in ("S", "Z", "D", "T", "L", "ZtZ", "StS", "StZ"):
            setattr(new, name, getattr(self, name).copy())
        new.skipped = self.skipped
        return new

    def accepts(self, s, z) -> bool:
        return float(s @ z) > CURVATURE_FLOOR * np.linalg.norm(s) * np.linalg.norm(z)

    def update(self, s, z, y) -> bool:
        """Store the pair unless it fails the curvature test; report which."""
        s = np.asarray(s, dtype=float)
        z = np.asarray(z, dtype=float)
        y = np.asarray(y, dtype=float)
        yy = float(y @ y)
        if not self.accepts(s, z) or yy <= 0.0:
            self.skipped += 1
            return False
        l, S, Z = self.l, self.S, self.Z
        self.D = prod_update(self.D, None, None, s, z, l)
        self.T = prod_update(self.T, S, None, s, z, l)
        self.L = prod_update(self.L, None, Z, s, None, l)
        self.ZtZ = prod_update(self.ZtZ, Z, Z, z, z, l)
        self.StS = prod_update(self.StS, S, S, s, s, l)
        self.StZ = prod_update(self.StZ, S, Z, s, z, l)
        self.S = col_update(S, s, l)
        self.Z = col_update(Z, z, l)
        self.delta = float(s @ z) / yy
        return True

    def drop_oldest(self) -> None:
        if self.k == 0:
            return
        self.S, self.Z = self.S[:, 1:], self.Z[:, 1:]
        for name in ("D", "T", "L", "ZtZ", "StS", "StZ"):
            setattr(self, name, getattr(self, name)[1:, 1:])

    def recompute_error(self) -> float:
        """Largest deviation of the stored blocks from direct products."""
        S, Z = self.S, self.Z
        StZ = S.T @ Z
        ref = {
            "D": np.diag(np.diag(StZ)),
            "T": np.triu(StZ),
            "L": np.tril(StZ, -1),
            "ZtZ": Z.T @ Z,
            "StS": S.T @ S,
            "StZ": StZ,
        }
        err = 0.0
        for name, R in ref.items():
            if R.size:
                scale = max(1.0, np.abs(R).max())
                err = max(err, np.abs(getattr(self, name) - R).max() / scale)
        return err


def init_memory(s0, z0, y0, l: int = 5) -> PairMemory:
    mem = PairMemory(np.asarray(s0).shape[0], l)
    if not mem.update(s0, z0, y0):
        raise CurvatureError("initial pair violates the curvature condition")
    return mem


def update_memory(mem: PairMemory, s, z, y) -> bool:
    return mem.update(s, z, y)


@dataclass
class MiddleMatrix:
    N: np.ndarray
    sigma: float
    tau: float
    theta: float
    ill_conditioned: bool = False


def assemble_N(mem: PairMemory) -> MiddleMatrix:
    """Unshifted middle matrix [[T^-T (D + delta Z'Z) T^-1, -delta T^-T], [-delta T^-1, 0]]."""
    k, d = mem.k, mem.delta
    if k == 0:
        return MiddleMatrix(np.zeros((0, 0)), 0.0, 1.0 / d, 0.0)
    Tinv = sla.solve_triangular(mem.T, np.eye(k))
    N11 = Tinv.T @ (mem.D + d * mem.ZtZ) @ Tinv
    N = np.block([[0.5 * (N11 + N11.T), -d * Tinv.T],
                  [-d * Tinv, np.zeros((k, k))]])
    bad = not np.all(np.isfinite(N)) or np.linalg.cond(mem.T) > T_COND_LIMIT
    return MiddleMatrix(N, 0.0, 1.0 / d, 0.0, bad)


def assemble_N_sigma(mem: PairMemory, sigma: float) -> MiddleMatrix:
    """Shifted middle matrix, the negated inverse of

        [[theta S'S,             theta L + tau T      ],
         [theta L' + tau T',     tau (tau D + Z'Z)     ]]

    with ``tau = 1/delta + sigma`` and ``theta = tau (1 - delta tau)``.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    d, k = mem.delta, mem.k
    tau = 1.0 / d + sigma
    # 1 - delta*tau == -delta*sigma exactly; this form keeps theta(0) == 0
    theta = -tau * d * sigma
    if k == 0:
        return MiddleMatrix(np.zeros((0, 0)), sigma, tau, theta)
    K = np.block([[theta * mem.StS, theta * mem.L + tau * mem.T],
                  [theta * mem.L.T + tau * mem.T.T, tau * (tau * mem.D + mem.ZtZ)]])
    try:
        N = -np.linalg.solve(K, np.eye(2 * k))
    except np.linalg.LinAlgError:
        raise SingularMiddleError(sigma) from None
    if not np.all(np.isfinite(N)):
        raise SingularMiddleError(sigma)
    return MiddleMatrix(0.5 * (N + N.T), sigma, tau, theta)


def apply_V(mem: PairMemory, N, g, gP) -> np.ndarray:
    """V g = [S Z] N [S Z]'g + delta P g, with ``gP = P g`` supplied."""
    if isinstance(N, MiddleMatrix):
        N = N.N
    g = np.asarray(g, dtype=float)
    if g.shape[0] != mem.n or np.shape(gP)[0] != mem.n:
        raise ValueError("dimension mismatch")
    out = mem.delta * np.asarray(gP, dtype=float)
    if mem.k:
        SZ = mem.SZ
        out = out + SZ @ (N @ (SZ.T @ g))
    return out


def apply_V_sigma(mem: PairMemory, N_sigma, tau: float, g, gP) -> np.ndarray:
    if isinstance(N_sigma, MiddleMatrix):
        N_sigma = N_sigma.N
    g = np.asarray(g, dtype=float)
    if g.shape[0] != mem.n or np.shape(gP)[0] != mem.n:
        raise ValueError("dimension mismatch")
    out = np.asarray(gP, dtype=float) / tau
    if mem.k:
        SZ = mem.SZ
        out = out + SZ @ (N_sigma @ (SZ.T @ g))
    return out


def model_curvature(mem: PairMemory, s) -> float:
    """s'Bs for a step in null(A), from the compact form of B.

    On null(A), Y's = Z's, so the compact BFGS formula needs only the
    stored blocks: s'Bs = g s's - w' K^{-1} w with g = 1/delta,
    w = [g S's; Z's] and K = [[g S'S, L], [L', -D]].
    """
    gam = 1.0 / mem.delta
    ss = float(s @ s)
    if mem.k == 0:
        return gam * ss
    w = np.concatenate([gam * (mem.S.T @ s), mem.Z.T @ s])
    K = np.block([[gam * mem.StS, mem.L], [mem.L.T, -mem.D]])
    return gam * ss - float(w @ np.linalg.solve(K, w))
