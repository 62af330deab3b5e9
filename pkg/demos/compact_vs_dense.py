"""
The compact step against dense linear algebra
=============================================

The solvers never form the L-BFGS matrix or a null-space basis.  This
script builds both explicitly on a tiny instance and checks that the
compact formulas reproduce them.
"""

import numpy as np

from rcrtr.oracle import bfgs_dense, dense_kkt_solve, memory_from_pairs, random_rcr_instance
from rcrtr.problem import make_rng
from rcrtr.rcr import apply_V, assemble_N
from rcrtr.trust_sc import eigen_factors

rng = make_rng(1)
n, m, k = 24, 6, 3
A, S, Y, delta, _ = random_rcr_instance(rng, n, m, k)
mem, P = memory_from_pairs(S, Y, A)
B = bfgs_dense(S, Y, mem.delta)

###############################################################################
# Equality-constrained step: solve the full KKT system densely, then apply
# the compact inverse, which only touches ``[S Z]`` and a 2k x 2k matrix.

g = rng.standard_normal(n)
s_dense = dense_kkt_solve(B, A, g).s
N = assemble_N(mem)
s_compact = -apply_V(mem, N, g, P @ g)
print("relative difference:", np.linalg.norm(s_dense - s_compact) / np.linalg.norm(s_dense))
print("|A s| =", np.linalg.norm(A @ s_compact))

###############################################################################
# The compact inverse vanishes on range(A').  On null(A) it equals ``delta``
# except along the stored pairs, where the eigenvalues are ``delta + Lambda2``.

V = np.column_stack([apply_V(mem, N, e, P @ e) for e in np.eye(n)])
F = eigen_factors(mem, N, g, P @ g)
eigs = np.linalg.eigvalsh(0.5 * (V + V.T))
np.set_printoptions(precision=4, suppress=True)
print("eigenvalues of V:", eigs)
print("delta =", round(mem.delta, 4), " delta + Lambda2 =", mem.delta + F.Lambda2)
