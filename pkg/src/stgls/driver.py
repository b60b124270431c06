"""End-to-end helpers: solve a problem on a mesh, run convergence sweeps."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .assembly import DiscreteSystem, FieldFunction, GlsParams, assemble
from .estimate import ErrorReport, EstimatorReport, error_norms, estimate
from .linsolve import SolveConfig, SolveReport, SolverError, solve
from .mesh import SpaceTimeMesh, uniform_mesh
from .problems import ProblemSpec

__all__ = ["Solution", "solve_problem", "ConvergenceRow", "convergence_study", "loglog_slope",
           "default_solve_config"]

log = logging.getLogger(__name__)

# below this many unknowns a sparse LU is cheaper and exact
_DIRECT_LIMIT = 5_000


def default_solve_config(n: int) -> SolveConfig:
    if n <= _DIRECT_LIMIT:
        return SolveConfig(method="direct")
    return SolveConfig(method="bicgstab", preconditioner="jacobi", rel_tol=1e-10)


@dataclass(eq=False)
class Solution:
    field: FieldFunction
    system: DiscreteSystem
    report: SolveReport


def solve_problem(mesh: SpaceTimeMesh, problem: ProblemSpec, degree: int = 1,
                  gls: GlsParams = GlsParams(), solve_cfg: SolveConfig | None = None,
                  require_convergence: bool = True) -> Solution:
    system, _ = assemble(mesh, problem, degree, gls)
    cfg = solve_cfg or default_solve_config(system.n)
    x, report = solve(system, None, cfg)
    log.info("solved %d dofs: %s", system.n, report)
    if require_convergence and not report.converged:
        raise SolverError(f"linear solve did not converge: {report}")
    return Solution(system.field(x), system, report)


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    h: float
    dofs: int
    eta: float
    err_h: float
    err_l2: float
    err_h_star: float


def loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def convergence_study(problem: ProblemSpec, levels, degree: int = 1, gls: GlsParams = GlsParams(),
                      solve_cfg: SolveConfig | None = None) -> list[ConvergenceRow]:
    rows = []
    for lev in levels:
        mesh = uniform_mesh(problem.domain, lev)
        sol = solve_problem(mesh, problem, degree, gls, solve_cfg)
        est: EstimatorReport = estimate(sol.field, problem, gls=gls)
        err: ErrorReport = error_norms(sol.field, problem, gls=gls)
        rows.append(ConvergenceRow(lev, float(mesh.h.max()), sol.system.n, est.eta, err.err_h,
                                   err.err_l2, err.err_h_star))
        log.info("level %d: eta=%.3e err_h=%.3e err_l2=%.3e", lev, est.eta, err.err_h, err.err_l2)
    return rows
