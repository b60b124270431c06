"""Solve-estimate-mark-refine loop on space-time meshes."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .assembly import FieldFunction, GlsParams
from .driver import solve_problem
from .estimate import error_norms, estimate
from .linsolve import SolveConfig, SolverError
from .mesh import SpaceTimeMesh, balance_2to1, refine
from .problems import ProblemSpec

__all__ = ["AdaptConfig", "AdaptRound", "AdaptTrace", "AdaptError", "adapt_loop", "mark_elements"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdaptConfig:
    """Marking and stopping rules.

    ``marking`` is ``"threshold"`` (refine every element with
    ``eta_K > eta_tol``) or ``"fixed_fraction"`` (smallest set carrying a
    ``theta`` share of ``sum eta_K^2``).
    """

    eta_tol: float = float("inf")
    max_rounds: int = 10
    max_level: int = 12
    marking: str = "threshold"
    theta: float = 0.5

    def __post_init__(self):
        if not self.eta_tol > 0:
            raise ValueError("eta_tol must be positive")
        if self.marking not in ("threshold", "fixed_fraction"):
            raise ValueError(f"unknown marking {self.marking!r}")
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if self.max_rounds < 0:
            raise ValueError("max_rounds must be nonnegative")


@dataclass(eq=False)
class AdaptRound:
    round: int
    dofs: int
    eta: float
    err_l2: float | None
    n_elements: int
    refined: int
    mesh: SpaceTimeMesh = field(repr=False)
    eta_K: np.ndarray = field(repr=False)


@dataclass(eq=False)
class AdaptTrace:
    rounds: list = field(default_factory=list)
    reason: str = ""

    def __len__(self):
        return len(self.rounds)

    def __iter__(self):
        return iter(self.rounds)


class AdaptError(RuntimeError):
    def __init__(self, message, trace: AdaptTrace):
        super().__init__(message)
        self.trace = trace


def mark_elements(mesh: SpaceTimeMesh, eta_K: np.ndarray, cfg: AdaptConfig) -> np.ndarray:
    """Positions of elements to refine; elements at ``max_level`` are skipped."""
    if cfg.marking == "threshold":
        marked = np.flatnonzero(eta_K > cfg.eta_tol)
    else:
        order = np.argsort(-eta_K**2, kind="stable")
        cum = np.cumsum(eta_K[order] ** 2)
        n = int(np.searchsorted(cum, cfg.theta * cum[-1]) + 1) if cum[-1] > 0 else 0
        marked = np.sort(order[:n])
    return marked[mesh.levels[marked] < cfg.max_level]


def adapt_loop(problem: ProblemSpec, degree: int, mesh: SpaceTimeMesh, cfg: AdaptConfig = AdaptConfig(),
               solve_cfg: SolveConfig | None = None, gls: GlsParams = GlsParams()):
    """Adaptive refinement driven by the residual indicator.

    Returns ``(field, trace)``. The loop stops when no element exceeds the
    tolerance, when ``max_rounds`` refinements have been done, or when every
    offending element already sits at ``max_level``; ``trace.reason`` says
    which. A failed linear solve raises :class:`AdaptError` carrying the
    partial trace.
    """
    trace = AdaptTrace()
    mesh = balance_2to1(mesh)
    for rnd in range(cfg.max_rounds + 1):
        try:
            sol = solve_problem(mesh, problem, degree, gls, solve_cfg)
        except SolverError as exc:
            trace.reason = "solver_failure"
            raise AdaptError(f"round {rnd}: {exc}", trace) from exc
        est = estimate(sol.field, problem, gls=gls)
        err = error_norms(sol.field, problem, gls=gls).err_l2 if problem.exact is not None else None
        eta_K = est.eta_K
        if np.all(eta_K <= cfg.eta_tol):
            trace.rounds.append(AdaptRound(rnd, sol.system.n, est.eta, err, len(mesh), 0, mesh, eta_K))
            trace.reason = "converged"
            break
        marked = mark_elements(mesh, eta_K, cfg)
        if len(marked) == 0 or rnd == cfg.max_rounds:
            trace.rounds.append(AdaptRound(rnd, sol.system.n, est.eta, err, len(mesh), 0, mesh, eta_K))
            trace.reason = "max_level" if len(marked) == 0 else "max_rounds"
            break
        trace.rounds.append(AdaptRound(rnd, sol.system.n, est.eta, err, len(mesh), len(marked), mesh, eta_K))
        log.info("round %d: dofs=%d eta=%.3e marked=%d", rnd, sol.system.n, est.eta, len(marked))
        mesh = balance_2to1(refine(mesh, mesh.ids[marked]))
    return sol.field, trace
