"""Limited-memory trust-region solvers for smooth minimization subject to
sparse linear equality constraints ``A x = b``."""

__version__ = "0.1.0"

from .problem import (
    ConstraintSystem,
    ConvexQuadratic,
    FeasibilityError,
    ProblemInstance,
    Rosenbrock,
    gen_experiment2_constraints,
    make_rng,
    min_norm_feasible,
    restore_feasibility,
    rosenbrock,
)
from .projection import LSQRProjector, Projector, QRProjector, build_projector, comp_proj
from .rcr import PairMemory, apply_V, apply_V_sigma, assemble_N, assemble_N_sigma
from .trust import SolverRun, Status, TrConfig
from .trust_l2 import solve_l2
from .trust_sc import solve_sc

__all__ = [
    "ConstraintSystem",
    "ConvexQuadratic",
    "FeasibilityError",
    "ProblemInstance",
    "Rosenbrock",
    "gen_experiment2_constraints",
    "make_rng",
    "min_norm_feasible",
    "restore_feasibility",
    "rosenbrock",
    "Projector",
    "QRProjector",
    "LSQRProjector",
    "build_projector",
    "comp_proj",
    "PairMemory",
    "apply_V",
    "apply_V_sigma",
    "assemble_N",
    "assemble_N_sigma",
    "SolverRun",
    "Status",
    "TrConfig",
    "solve_l2",
    "solve_sc",
]
