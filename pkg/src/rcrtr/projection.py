"""Orthogonal projection onto null(A).

``P = I - A'(AA')^{-1}A`` is never formed.  Two backends are provided:

``qr``
    Column-pivoted Householder QR of ``A'``.  ``P y`` zeroes the first
    ``rank`` coordinates of ``Q' y`` before mapping back, i.e.
    ``z = y - Q1 (Q1' y)``.
``lsqr``
    Right-preconditioned LSQR on ``min_w ||A_r' w - y||`` with ``z`` the
    residual.  The preconditioner is the triangular factor of a pivoted QR
    of ``A'`` with relatively dense columns of ``A`` removed.

Both accept rank-deficient ``A``.
"""
from __future__ import annotations

import logging
import threading

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, lsqr

__all__ = [
    "RANK_TOL",
    "DENSE_COLUMN_FRACTION",
    "Projector",
    "QRProjector",
    "LSQRProjector",
    "dense_column_mask",
    "build_qr_projector",
    "build_lsqr_projector",
    "build_projector",
    "comp_proj",
]

log = logging.getLogger(__name__)

RANK_TOL = 1e-10
DENSE_COLUMN_FRACTION = 0.1
LSQR_TOL = 1e-15
LSQR_MIN_ITER = 100


def _as_csr(A) -> sp.csr_matrix:
    A = sp.csr_matrix(A, dtype=float, copy=True)
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


def _numerical_rank(R) -> int:
    d = np.abs(np.diag(R))
    if d.size == 0:
        return 0
    return int(np.count_nonzero(d > RANK_TOL * max(1.0, d[0])))


def dense_column_mask(A, threshold: float = DENSE_COLUMN_FRACTION) -> np.ndarray:
    """Flag column j when nnz(A[:, j]) / m exceeds ``threshold``."""
    A = sp.csc_matrix(A)
    m = A.shape[0]
    if m < 1:
        raise ValueError("A must have at least one row")
    A = A.copy()
    A.eliminate_zeros()
    return np.diff(A.indptr) / m > threshold


class Projector:
    """Shared state: shape and rank estimate, plus a thread-safe counter."""

    backend = "none"

    def __init__(self, A):
        self.A = _as_csr(A)
        self.m, self.n = self.A.shape
        if self.m >= self.n:
            raise ValueError(f"need m < n, got A of shape {self.A.shape}")
        self.rank_estimate = 0
        self._count = 0
        self._lock = threading.Lock()

    @property
    def projection_count(self) -> int:
        return self._count

    def reset_count(self) -> None:
        with self._lock:
            self._count = 0

    def project(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape[0] != self.n:
            raise ValueError(f"vector has length {y.shape[0]}, expected {self.n}")
        with self._lock:
            self._count += 1
        if y.ndim == 1:
            return self._project(y)
        return np.column_stack([self._project(col) for col in y.T])

    __call__ = project

    def _project(self, y):
        raise NotImplementedError

    def min_norm_solve(self, b: np.ndarray) -> np.ndarray:
        """Minimum-norm x with A x = b (least squares if b is inconsistent)."""
        raise NotImplementedError

    def matrix(self) -> np.ndarray:
        """Dense P (small problems only; does not touch the counter)."""
        I = np.eye(self.n)
        return np.column_stack([self._project(I[:, j]) for j in range(self.n)])


class QRProjector(Projector):
    backend = "qr"

    def __init__(self, A):
        super().__init__(A)
        At = self.A.T.toarray()
        (self._h, self._tau), R, self.perm = sla.qr(At, mode="raw", pivoting=True)
        self.R = np.triu(R)
        self.rank_estimate = _numerical_rank(self.R)
        r = self.rank_estimate
        self._hr = np.asfortranarray(self._h[:, :r])
        self._taur = self._tau[:r].copy()

    def _qmult(self, c, trans):
        if self.rank_estimate == 0:
            return c.copy()
        out, _, info = sla.lapack.dormqr("L", trans, self._hr, self._taur, c[:, None],
                                        lwork=max(64, c.shape[0]), overwrite_c=0)
        if info != 0:
            raise RuntimeError(f"dormqr failed with info={info}")
        return out[:, 0]

    def qt(self, y):
        """Householder-transformed y; the first ``rank`` entries are Q1'y."""
        return self._qmult(np.asarray(y, dtype=float), "T")

    def q1t(self, y):
        return self.qt(y)[: self.rank_estimate]

    def _project(self, y):
        c = self._qmult(y, "T")
        c[: self.rank_estimate] = 0.0
        return self._qmult(c, "N")

    def min_norm_solve(self, b):
        r = self.rank_estimate
        b = np.asarray(b, dtype=float)
        c = np.zeros(self.n)
        if r == self.m:
            c[:r] = sla.solve_triangular(self.R[:r, :r], b[self.perm], trans="T")
        elif r:
            # A[perm] = R[:r]' Q1' up to the dropped rank, so fit all m equations
            c[:r] = sla.lstsq(self.R[:r].T, b[self.perm])[0]
        return self._qmult(c, "N")


class LSQRProjector(Projector):
    backend = "lsqr"

    def __init__(self, A, *, tol: float = LSQR_TOL, maxit: int | None = None):
        super().__init__(A)
        self.tol = tol
        self.dense_mask = dense_column_mask(self.A) if self.m else np.zeros(self.n, bool)
        sparse_cols = np.flatnonzero(~self.dense_mask)
        self.unpreconditioned = sparse_cols.size == 0
        if self.unpreconditioned:
            self.rows = np.arange(self.m)
            self.R_precond = np.eye(self.m)
            self.rank_estimate = self.m
        else:
            As = self.A[:, sparse_cols]
            _, Rs, perm = sla.qr(As.T.toarray(), mode="economic", pivoting=True)
            R = np.zeros((self.m, self.m))
            R[: Rs.shape[0]] = np.triu(Rs)
            r = _numerical_rank(R)
            self.rank_estimate = r
            if self.dense_mask.any():
                # stripped columns may carry rank: keep every row, patch small pivots
                self.rows = perm
                d = np.abs(np.diag(R))
                small = d <= RANK_TOL * max(1.0, d[0] if d.size else 0.0)
                R[small, small] = 1.0
                self.R_precond = R
            else:
                self.rows = perm[:r]
                self.R_precond = R[:r, :r].copy()
        self.Ar = self.A[self.rows]
        self.ArT = self.Ar.T.tocsr()
        # exact arithmetic needs at most m steps; rounding can cost a few more when m is small
        self.maxit = maxit if maxit is not None else max(self.m, LSQR_MIN_ITER)
        self.last_iterations = 0
        self.last_converged = True
        self.failures = 0
        k = self.rows.size
        Rp = self.R_precond
        self._op = LinearOperator(
            (self.n, k),
            matvec=lambda v: self.ArT @ sla.solve_triangular(Rp, v),
            rmatvec=lambda u: sla.solve_triangular(Rp, self.Ar @ u, trans="T"),
            dtype=float,
        )

    def _project(self, y):
        if self.rows.size == 0:
            return y.copy()
        out = lsqr(self._op, y, atol=self.tol, btol=self.tol, conlim=0.0, iter_lim=self.maxit)
        istop, itn = out[1], out[2]
        self.last_iterations = itn
        self.last_converged = istop != 7
        if not self.last_converged:
            self.failures += 1
            log.warning("LSQR projection hit maxit=%d (residual %.2e)", self.maxit, out[3])
        w = sla.solve_triangular(self.R_precond, out[0])
        return y - self.ArT @ w

    def min_norm_solve(self, b):
        b = np.asarray(b, dtype=float)
        if self.rows.size == 0:
            return np.zeros(self.n)
        Rp = self.R_precond
        op_t = LinearOperator(
            (self.rows.size, self.n),
            matvec=lambda x: sla.solve_triangular(Rp, self.Ar @ x, trans="T"),
            rmatvec=lambda w: self.ArT @ sla.solve_triangular(Rp, w),
            dtype=float,
        )
        rhs = sla.solve_triangular(Rp, b[self.rows], trans="T")
        x = np.zeros(self.n)
        # one refinement sweep recovers digits lost to the 1e-15 stopping test
        for _ in range(2):
            r = rhs - op_t @ x
            x = x + lsqr(op_t, r, atol=self.tol, btol=self.tol, conlim=0.0,
                         iter_lim=max(10 * self.rows.size, 100))[0]
        return x


def build_qr_projector(A) -> QRProjector:
    return QRProjector(A)


def build_lsqr_projector(A, **kw) -> LSQRProjector:
    return LSQRProjector(A, **kw)


def build_projector(A, backend: str = "qr") -> Projector:
    if backend == "qr":
        return QRProjector(A)
    if backend == "lsqr":
        return LSQRProjector(A)
    raise ValueError(f"unknown projector backend {backend!r}")


def comp_proj(proj: Projector, y) -> np.ndarray:
    """z = P y with the prepared projector; counts one projection."""
    return proj.project(y)
