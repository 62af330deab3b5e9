"""
Solving a constrained Rosenbrock problem
========================================

Minimize the chained Rosenbrock function subject to a random sparse system
``A x = b`` with a quarter as many rows as unknowns.
"""

import numpy as np

from rcrtr import ProblemInstance, Rosenbrock, TrConfig, solve_l2, solve_sc
from rcrtr.problem import gen_experiment2_constraints

n = 1000
cs = gen_experiment2_constraints(n, density=0.1, seed=0)
print(f"A is {cs.m} x {cs.n} with {cs.A.nnz} nonzeros")

problem = ProblemInstance(Rosenbrock(n), cs, name="rosenbrock")

###############################################################################
# The starting point is the minimum-norm solution of ``A x = b``.  Both
# solvers keep every iterate on the constraint set, so feasibility should sit
# at round-off level throughout.

cfg = TrConfig(l=5, eps1=1e-5)
for solve in (solve_l2, solve_sc):
    for backend in ("qr", "lsqr"):
        run = solve(problem, cfg, backend)
        print(f"{run.algorithm}-{backend:4s} {run.status.value:10s} "
              f"iters={run.iterations:3d}  f={run.f:.3e}  "
              f"|Pg|inf={run.grad_inf_norm:.1e}  |Ax-b|={run.feasibility_norm:.1e}  "
              f"projections={run.projection_count}  {run.wall_time:.2f}s")

###############################################################################
# The trace keeps one row per outer iteration.  Here is how the radius and
# the projected gradient evolve for the last run.

for row in run.trace[::4]:
    print(f"k={row.k:3d}  f={row.f:.4e}  |Pg|inf={row.grad_inf:.2e}  Delta={row.Delta:.2e}")

###############################################################################
# Any point of the constraint set works as a warm start.  An infeasible one
# is repaired by a minimum-norm correction before the first iteration.

x0 = np.ones(n)
run = solve_l2(ProblemInstance(Rosenbrock(n), cs, warm_start=x0), cfg)
print(f"warm start: {run.status.value} after {run.iterations} iterations")
