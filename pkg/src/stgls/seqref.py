"""Crank-Nicolson time marching on a uniform spatial mesh.

This is the sequential baseline the space-time solutions are compared
against: plain Galerkin in space (no stabilization), consistent mass matrix,
trapezoidal rule in time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import BasisSpec, gauss_rule, tabulate
from .problems import ProblemSpec

__all__ = ["TimeMarchConfig", "SpatialBox", "SpatialField", "SpatialFESpace", "CNResult",
           "crank_nicolson"]


@dataclass(frozen=True)
class TimeMarchConfig:
    """Uniform mesh with ``2**level`` elements per axis and as many steps."""

    level: int
    degree: int = 1
    steps: int | None = None

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be nonnegative")
        if self.steps is not None and self.steps < 1:
            raise ValueError("steps must be positive")

    @property
    def n_steps(self) -> int:
        return self.steps if self.steps is not None else 2**self.level


@dataclass(frozen=True)
class SpatialBox:
    lower: np.ndarray
    upper: np.ndarray

    @property
    def dim_space(self) -> int:
        return len(self.lower)

    @property
    def ndim(self) -> int:
        return len(self.lower)

    def contains(self, points, tol=1e-12):
        p = np.asarray(points, dtype=float)
        slack = tol * (self.upper - self.lower)
        return np.all((p >= self.lower - slack) & (p <= self.upper + slack), axis=-1)


class SpatialFESpace:
    """Continuous Q_k space on a uniform grid of ``n**d`` elements."""

    def __init__(self, lower, upper, n: int, degree: int):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.dim = len(self.lower)
        self.n = n
        self.degree = degree
        self.spec = BasisSpec(degree, self.dim)
        self.h = (self.upper - self.lower) / n
        npa = degree * n + 1
        self.nodes_per_axis = npa
        grids = np.meshgrid(*([np.arange(n)] * self.dim), indexing="ij")
        ecoords = np.stack([g.ravel(order="F") for g in grids], axis=-1)  # first axis fastest
        local = self.spec.node_multi_indices()
        gidx = ecoords[:, None, :] * degree + local[None]
        strides = npa ** np.arange(self.dim)
        self.element_coords = ecoords
        self.element_nodes = gidx @ strides
        ids = np.arange(npa**self.dim)
        nidx = np.stack([(ids // npa**a) % npa for a in range(self.dim)], axis=-1)
        self.node_index = nidx
        self.node_coords = self.lower + nidx / (degree * n) * (self.upper - self.lower)
        self.boundary = np.flatnonzero(np.any((nidx == 0) | (nidx == npa - 1), axis=1))
        self.n_nodes = npa**self.dim

    @property
    def domain(self) -> SpatialBox:
        return SpatialBox(self.lower, self.upper)

    def assemble(self, nu: float, advection, t: float = 0.0):
        """Mass matrix and advection-diffusion stiffness."""
        rule = gauss_rule(self.degree + 2, self.dim)
        phi, dphi = tabulate(self.spec, rule.points, derivatives=1)
        vol = float(np.prod(self.h))
        anchors = self.lower + self.element_coords * self.h
        pts = anchors[:, None, :] + rule.points[None] * self.h
        a = np.asarray(advection(pts, np.full(pts.shape[:-1], t)), dtype=float)
        grad = dphi / self.h  # (nq, nb, d)
        w = rule.weights * vol
        Me = np.einsum("q,qi,qj->ij", w, phi, phi)
        Ke = nu * np.einsum("q,qia,qja->ij", w, grad, grad)
        Ce = np.einsum("q,qi,eqa,qja->eij", w, phi, a, grad)
        en = self.element_nodes
        nb = en.shape[1]
        rows = np.repeat(en, nb, axis=1).ravel()
        cols = np.tile(en, (1, nb)).ravel()
        ne = len(en)
        shape = (self.n_nodes, self.n_nodes)
        M = sp.coo_matrix((np.tile(Me.ravel(), ne), (rows, cols)), shape=shape).tocsr()
        A = sp.coo_matrix(((Ce + Ke[None]).reshape(ne, -1).ravel(), (rows, cols)), shape=shape).tocsr()
        return M, A

    def load(self, forcing, t: float) -> np.ndarray:
        rule = gauss_rule(self.degree + 2, self.dim)
        phi = tabulate(self.spec, rule.points, derivatives=0)[0]
        vol = float(np.prod(self.h))
        anchors = self.lower + self.element_coords * self.h
        pts = anchors[:, None, :] + rule.points[None] * self.h
        f = np.asarray(forcing(pts, np.full(pts.shape[:-1], t)), dtype=float)
        be = np.einsum("eq,q,qi->ei", f, rule.weights * vol, phi)
        out = np.zeros(self.n_nodes)
        np.add.at(out, self.element_nodes, be)
        return out

    def evaluate(self, coeffs, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if not np.all(self.domain.contains(points)):
            raise ValueError("point outside the spatial domain")
        rel = (points - self.lower) / self.h
        c = np.clip(np.floor(rel).astype(np.int64), 0, self.n - 1)
        xi = np.clip(rel - c, 0.0, 1.0)
        e = c @ (self.n ** np.arange(self.dim))
        vals = tabulate(self.spec, xi, derivatives=0)[0]
        return np.sum(vals * coeffs[self.element_nodes[e]], axis=-1)


@dataclass(eq=False)
class SpatialField:
    space: SpatialFESpace
    coeffs: np.ndarray
    time: float

    @property
    def domain(self) -> SpatialBox:
        return self.space.domain

    def __call__(self, points):
        return self.space.evaluate(self.coeffs, points)


@dataclass(eq=False)
class CNResult:
    snapshots: dict
    final: SpatialField
    dt: float
    steps: int
    l2_history: list = field(default_factory=list)


def crank_nicolson(problem: ProblemSpec, cfg: TimeMarchConfig, snapshot_times=(0.0, 1.0)) -> CNResult:
    """March ``(M/dt + A/2) u^{n+1} = (M/dt - A/2) u^n + (F^n + F^{n+1})/2``.

    The advection field is sampled once at the initial time, so it must be
    stationary. Dirichlet values are imposed at every step. ``l2_history``
    records the discrete L2 norm ``sqrt(u^T M u)`` after every step.
    """
    dom = problem.domain
    t0, T = dom.initial_time, dom.final_time
    steps = cfg.n_steps
    dt = (T - t0) / steps
    space = SpatialFESpace(dom.lower[:-1], dom.upper[:-1], 2**cfg.level, cfg.degree)
    M, A = space.assemble(problem.nu, problem.advection, t0)
    lhs = (M / dt + 0.5 * A).tolil()
    rhs_op = (M / dt - 0.5 * A).tocsr()
    bnd = space.boundary
    interior = np.setdiff1d(np.arange(space.n_nodes), bnd)
    lhs = lhs.tocsr()
    L_ii = lhs[interior][:, interior].tocsc()
    L_ib = lhs[interior][:, bnd]
    try:
        lu = spla.splu(L_ii)
    except RuntimeError as exc:
        raise RuntimeError(f"Crank-Nicolson factorization failed: {exc}") from exc
    x = space.node_coords
    u = np.asarray(problem.initial_u0(x), dtype=float).copy()
    wanted = {float(t): int(round((t - t0) / dt)) for t in snapshot_times}
    snaps = {t: SpatialField(space, u.copy(), t0) for t, n in wanted.items() if n == 0}
    f_old = space.load(problem.forcing, t0)
    history = []
    for n in range(1, steps + 1):
        t = t0 + n * dt
        f_new = space.load(problem.forcing, t)
        b = rhs_op @ u + 0.5 * (f_old + f_new)
        g = np.asarray(problem.dirichlet_g(x[bnd], np.full(len(bnd), t)), dtype=float)
        sol = lu.solve(b[interior] - L_ib @ g)
        if not np.all(np.isfinite(sol)):
            raise RuntimeError(f"Crank-Nicolson step {n} produced non-finite values")
        u = np.empty(space.n_nodes)
        u[interior] = sol
        u[bnd] = g
        f_old = f_new
        history.append(float(np.sqrt(u @ (M @ u))))
        for tw, nw in wanted.items():
            if nw == n:
                snaps[tw] = SpatialField(space, u.copy(), t)
    return CNResult(snaps, SpatialField(space, u, T), dt, steps, history)
