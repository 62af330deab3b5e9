"""
Benchmarking with performance profiles
======================================

Run the four solver variants on a handful of synthetic problems, then
summarize iteration counts with a performance profile.
"""

import tempfile
from pathlib import Path

from rcrtr.harness import metric_table, parse_suite, performance_profile, performance_ratios, run_suite

suite = """
# name       size   density  seed
name=r200    n=200  density=0.1 seed=1
name=r400    n=400  density=0.1 seed=2
name=r600    n=600  density=0.05 seed=3
name=q400    n=400  density=0.1 seed=4 objective=quadratic
"""

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "suite.txt"
    path.write_text(suite)
    results = run_suite(parse_suite(path))

for r in results:
    print(f"{r.problem:6s} {r.solver:8s} {r.status:10s} {r.iterations:4d} it "
          f"{r.wall_time_seconds:6.3f}s")

###############################################################################
# ``rho_s(tau)`` is the fraction of problems on which solver ``s`` is within
# a factor ``tau`` of the best other solver.  A value at ``tau < 1`` means the
# solver beat every competitor.

prof = performance_profile(performance_ratios(metric_table(results, "iters")))
taus = [t for t, _ in next(iter(prof.values()))]
picks = [i for i, t in enumerate(taus) if t in (0.5, 1.0, 2.0, 4.0)]
print("tau     " + "  ".join(f"{taus[i]:5.2f}" for i in picks))
for s, pts in prof.items():
    print(f"{s:8s}" + "  ".join(f"{pts[i][1]:5.2f}" for i in picks))
