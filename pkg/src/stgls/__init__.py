"""Space-time stabilized finite elements for transient advection-diffusion.

The whole space-time cylinder is meshed with dyadic hypercubes, discretized
with continuous tensor-product Lagrange elements plus Galerkin/least-squares
stabilization, and solved in one linear system. A residual error indicator
drives adaptive refinement; a Crank-Nicolson solver serves as the
sequential baseline.
"""

from .adapt import AdaptConfig, AdaptTrace, adapt_loop
from .assembly import FieldFunction, GlsParams, assemble, build_dofmap, evaluate, gls_parameter
from .basis import BasisSpec, gauss_rule, tabulate
from .driver import convergence_study, loglog_slope, solve_problem
from .estimate import error_norms, estimate, sample_profile
from .linsolve import SolveConfig, SolverError, estimate_condition, solve
from .mesh import SpaceTimeDomain, SpaceTimeMesh, balance_2to1, refine, uniform_mesh
from .problems import PROBLEMS, ProblemSpec, make_problem
from .seqref import TimeMarchConfig, crank_nicolson

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig", "AdaptTrace", "adapt_loop",
    "FieldFunction", "GlsParams", "assemble", "build_dofmap", "evaluate", "gls_parameter",
    "BasisSpec", "gauss_rule", "tabulate",
    "convergence_study", "loglog_slope", "solve_problem",
    "error_norms", "estimate", "sample_profile",
    "SolveConfig", "SolverError", "estimate_condition", "solve",
    "SpaceTimeDomain", "SpaceTimeMesh", "balance_2to1", "refine", "uniform_mesh",
    "PROBLEMS", "ProblemSpec", "make_problem",
    "TimeMarchConfig", "crank_nicolson",
]
