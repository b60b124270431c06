"""Galerkin/least-squares space-time discretization.

The bilinear form assembled here is

    (u_t, v) + (a . grad u, v) + (nu grad u, grad v) + sum_K eps_K (M u, M v)_K

with ``M = d/dt + a . grad - nu lap`` and the matching load
``(f, v) + sum_K eps_K (f, M v)_K``. Gradients and Laplacians act in space
only; time is the last coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .basis import BasisSpec, gauss_rule, tabulate
from .mesh import (MeshNotBalancedError, NodeNumbering, SpaceTimeMesh, hanging_constraints,
                   number_nodes)
from .problems import ProblemSpec

__all__ = [
    "GlsParams",
    "DofMap",
    "DiscreteSystem",
    "FieldFunction",
    "gls_parameter",
    "build_dofmap",
    "assemble",
    "interpolate_nodal",
    "evaluate",
    "ElementQuadrature",
    "element_quadrature",
]

# float entries per chunk of element-level work arrays
_CHUNK_BUDGET = 3_000_000


@dataclass(frozen=True)
class GlsParams:
    c1: float = 4.0
    c2: float = 2.0
    enabled: bool = True

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("c1 and c2 must be positive")


def gls_parameter(h_K, nu, a_tilde_mag, params: GlsParams = GlsParams()):
    """Stabilization weight ``[c1 nu / h^2 + c2 |a~| / h]^-1``.

    Vectorized over ``h_K`` and ``a_tilde_mag``. Returns zeros when
    stabilization is disabled.
    """
    h_K = np.asarray(h_K, dtype=float)
    if np.any(h_K <= 0):
        raise ValueError("element size must be positive")
    if not params.enabled:
        return np.zeros_like(h_K) if h_K.ndim else 0.0
    eps = 1.0 / (params.c1 * nu / h_K**2 + params.c2 * np.asarray(a_tilde_mag, dtype=float) / h_K)
    return eps if np.ndim(eps) else float(eps)


def _resolve_constraints(n_nodes, nodes, masters, weights):
    """Sparse map W with u_all = W u_all[unconstrained]; chains resolved."""
    constrained = np.zeros(n_nodes, dtype=bool)
    constrained[nodes] = True
    free_rows = np.flatnonzero(~constrained)
    nz = weights != 0.0
    rows = np.concatenate([free_rows, np.repeat(nodes, nz.sum(axis=1))])
    cols = np.concatenate([free_rows, masters[nz]])
    vals = np.concatenate([np.ones(len(free_rows)), weights[nz]])
    W = sp.csr_matrix((vals, (rows, cols)), shape=(n_nodes, n_nodes))
    for _ in range(64):
        used = W[:, constrained]
        if used.nnz == 0:
            break
        W = (W @ W).tocsr()
        W.eliminate_zeros()
    else:  # pragma: no cover - balanced meshes resolve in a few passes
        raise RuntimeError("hanging-node constraints did not resolve")
    return W[:, free_rows].tocsr(), free_rows, constrained


@dataclass(eq=False)
class DofMap:
    """Degree-of-freedom layout on a mesh.

    Every node is exactly one of: hanging (value from masters), Dirichlet
    (prescribed on the lateral or initial boundary), or free.
    ``prolongation`` maps the unconstrained values (free then Dirichlet
    columns, see ``free`` / ``dirichlet``) to all node values.
    """

    mesh: SpaceTimeMesh
    degree: int
    numbering: NodeNumbering
    hanging: np.ndarray
    hanging_masters: np.ndarray
    hanging_weights: np.ndarray
    unconstrained: np.ndarray
    free: np.ndarray
    dirichlet: np.ndarray
    prolongation: sp.csr_matrix

    @property
    def n_nodes(self) -> int:
        return self.numbering.n_nodes

    @property
    def n_free(self) -> int:
        return len(self.free)

    @property
    def element_nodes(self) -> np.ndarray:
        return self.numbering.element_nodes

    @property
    def node_coords(self) -> np.ndarray:
        return self.numbering.node_coords

    @cached_property
    def _column_split(self):
        pos = np.full(self.n_nodes, -1)
        pos[self.unconstrained] = np.arange(len(self.unconstrained))
        return pos[self.free], pos[self.dirichlet]

    @cached_property
    def free_prolongation(self) -> sp.csr_matrix:
        return self.prolongation[:, self._column_split[0]].tocsr()

    @cached_property
    def dirichlet_prolongation(self) -> sp.csr_matrix:
        return self.prolongation[:, self._column_split[1]].tocsr()

    def expand(self, free_values, dirichlet_values) -> np.ndarray:
        """All node values from free and Dirichlet values."""
        return self.free_prolongation @ free_values + self.dirichlet_prolongation @ dirichlet_values

    def boundary_values(self, problem: ProblemSpec) -> np.ndarray:
        """Prescribed values on the Dirichlet nodes: u0 at t0, g elsewhere."""
        x = self.node_coords[self.dirichlet]
        t = x[:, -1]
        vals = np.asarray(problem.dirichlet_g(x[:, :-1], t), dtype=float)
        at_t0 = self.numbering.node_index[self.dirichlet, -1] == 0
        if np.any(at_t0):
            vals = vals.copy()
            vals[at_t0] = problem.initial_u0(x[at_t0, :-1])
        return vals


def build_dofmap(mesh: SpaceTimeMesh, degree: int) -> DofMap:
    if degree not in (1, 2, 3):
        raise ValueError(f"unsupported degree {degree}")
    if not mesh.is_balanced():
        raise MeshNotBalancedError("assembly requires a 2:1 balanced mesh")
    numbering = number_nodes(mesh, degree)
    nodes, masters, weights = hanging_constraints(mesh, numbering)
    P, unconstrained, _ = _resolve_constraints(numbering.n_nodes, nodes, masters, weights)
    idx = numbering.node_index[unconstrained]
    on_t0 = idx[:, -1] == 0
    on_side = np.any((idx[:, :-1] == 0) | (idx[:, :-1] == numbering.scale), axis=1)
    is_dir = on_t0 | on_side
    return DofMap(mesh=mesh, degree=degree, numbering=numbering, hanging=nodes,
                  hanging_masters=masters, hanging_weights=weights, unconstrained=unconstrained,
                  free=unconstrained[~is_dir], dirichlet=unconstrained[is_dir], prolongation=P)


@dataclass(eq=False)
class ElementQuadrature:
    """Per-element quadrature data for a chunk of elements."""

    elements: np.ndarray  # (ne,)
    points: np.ndarray  # (ne, nq, ndim) physical
    jxw: np.ndarray  # (ne, nq) weight times volume
    phi: np.ndarray  # (nq, nb)
    grad: np.ndarray  # (ne, nq, nb, ndim) physical
    lap: np.ndarray  # (ne, nq, nb) spatial Laplacian
    advection: np.ndarray  # (ne, nq, dim_space)
    eps: np.ndarray  # (ne,)

    def m_operator(self, nu: float) -> np.ndarray:
        """``M phi_j`` at quadrature points, shape (ne, nq, nb)."""
        ds = self.advection.shape[-1]
        transport = self.grad[..., -1] + np.einsum("eqa,eqja->eqj", self.advection, self.grad[..., :ds])
        return transport - nu * self.lap


def _reference_tables(degree, ndim, q):
    spec = BasisSpec(degree, ndim)
    rule = gauss_rule(q, ndim)
    phi, dphi, d2phi = tabulate(spec, rule.points, derivatives=2)
    return rule, phi, dphi, d2phi


def element_quadrature(mesh: SpaceTimeMesh, problem: ProblemSpec, degree: int,
                       gls: GlsParams = GlsParams(), q: int | None = None, chunk: int | None = None):
    """Yield :class:`ElementQuadrature` blocks covering all elements in order."""
    ndim, ds = mesh.ndim, mesh.dim_space
    q = degree + 2 if q is None else q
    rule, phi, dphi, d2phi = _reference_tables(degree, ndim, q)
    nq, nb = phi.shape
    if chunk is None:
        chunk = max(1, _CHUNK_BUDGET // (nq * nb * ndim))
    for start in range(0, len(mesh), chunk):
        e = np.arange(start, min(start + chunk, len(mesh)))
        h = mesh.sizes[e]  # (ne, ndim)
        pts = mesh.anchors[e][:, None, :] + rule.points[None, :, :] * h[:, None, :]
        jxw = rule.weights[None, :] * mesh.volumes[e][:, None]
        grad = dphi[None, :, :, :] / h[:, None, None, :]
        lap = np.einsum("qja,ea->eqj", d2phi[..., :ds], 1.0 / h[:, :ds] ** 2)
        adv = np.asarray(problem.advection(pts[..., :ds], pts[..., -1]), dtype=float)
        amag = np.sqrt(1.0 + np.sum(adv**2, axis=-1)).max(axis=1)
        eps = np.asarray(gls_parameter(mesh.h[e], problem.nu, amag, gls), dtype=float)
        yield ElementQuadrature(e, pts, jxw, phi, grad, lap, adv, np.broadcast_to(eps, e.shape))


@dataclass(eq=False)
class DiscreteSystem:
    """Reduced system over the free dofs plus the full-node operator.

    ``matrix`` and ``rhs`` act on free dofs only; ``lifting`` is the
    contribution of the prescribed values already moved to ``rhs``.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    lifting: np.ndarray
    dirichlet_values: np.ndarray
    dofmap: DofMap
    full_matrix: sp.csr_matrix
    full_rhs: np.ndarray
    problem: ProblemSpec
    gls: GlsParams

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def field(self, free_values) -> "FieldFunction":
        return FieldFunction(self.dofmap, self.dofmap.expand(free_values, self.dirichlet_values))

    def bilinear(self, u_nodes, v_nodes) -> float:
        """``b_h(u, v)`` for node-value vectors (trial ``u``, test ``v``)."""
        return float(v_nodes @ (self.full_matrix @ u_nodes))


def assemble(mesh: SpaceTimeMesh, problem: ProblemSpec, degree: int,
             gls: GlsParams = GlsParams(), dofmap: DofMap | None = None):
    """Assemble the stabilized system and its dof map.

    Returns ``(system, dofmap)``.
    """
    if mesh.dim_space != problem.dim_space:
        raise ValueError("mesh and problem dimensions differ")
    if dofmap is None:
        dofmap = build_dofmap(mesh, degree)
    nu = problem.nu
    ds = mesh.dim_space
    en = dofmap.element_nodes
    nb = en.shape[1]
    n = dofmap.n_nodes
    rows = np.repeat(en, nb, axis=1).astype(np.int32)
    cols = np.tile(en, (1, nb)).astype(np.int32)
    data = np.empty(rows.shape)
    rhs = np.zeros(n)
    for eq in element_quadrature(mesh, problem, degree, gls):
        mphi = eq.m_operator(nu)
        transport = mphi + nu * eq.lap
        wphi = eq.jxw[:, :, None] * eq.phi[None, :, :]
        Ae = np.einsum("eqi,eqj->eij", wphi, transport)
        wgrad = eq.jxw[:, :, None, None] * eq.grad[..., :ds]
        Ae += nu * np.einsum("eqia,eqja->eij", wgrad, eq.grad[..., :ds])
        Ae += eq.eps[:, None, None] * np.einsum("eqi,eq,eqj->eij", mphi, eq.jxw, mphi)
        data[eq.elements] = Ae.reshape(len(eq.elements), -1)
        f = np.asarray(problem.forcing(eq.points[..., :ds], eq.points[..., -1]), dtype=float)
        test = eq.phi[None, :, :] + eq.eps[:, None, None] * mphi
        be = np.einsum("eq,eqi->ei", eq.jxw * f, test)
        np.add.at(rhs, en[eq.elements], be)
    A = sp.coo_matrix((data.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()
    A.sum_duplicates()
    Pf = dofmap.free_prolongation
    Pd = dofmap.dirichlet_prolongation
    ud = dofmap.boundary_values(problem)
    lifting = Pf.T @ (A @ (Pd @ ud))
    matrix = (Pf.T @ A @ Pf).tocsr()
    matrix.sort_indices()
    reduced_rhs = Pf.T @ rhs - lifting
    system = DiscreteSystem(matrix=matrix, rhs=reduced_rhs, lifting=lifting, dirichlet_values=ud,
                            dofmap=dofmap, full_matrix=A, full_rhs=rhs, problem=problem, gls=gls)
    return system, dofmap


@dataclass(eq=False)
class FieldFunction:
    """Continuous piecewise-polynomial field given by all node values."""

    dofmap: DofMap
    coeffs: np.ndarray

    @property
    def mesh(self) -> SpaceTimeMesh:
        return self.dofmap.mesh

    @property
    def degree(self) -> int:
        return self.dofmap.degree

    def local(self, elements, xi, derivatives=1):
        """Value, physical gradient and spatial Laplacian on given elements.

        ``elements`` has shape (m,) and ``xi`` (m, ..., ndim) reference
        points. Gradients include the time derivative as last component.
        """
        mesh = self.mesh
        spec = BasisSpec(self.degree, mesh.ndim)
        tabs = tabulate(spec, xi, derivatives=derivatives)
        c = self.coeffs[self.dofmap.element_nodes[elements]]  # (m, nb)
        extra = (None,) * (np.ndim(xi) - 2)
        cc = c[(slice(None),) + extra]
        value = np.sum(tabs[0] * cc, axis=-1)
        out = [value]
        if derivatives >= 1:
            h = mesh.sizes[elements][(slice(None),) + extra]
            out.append(np.einsum("...ja,...j->...a", tabs[1], cc) / h)
        if derivatives >= 2:
            ds = mesh.dim_space
            hs = mesh.sizes[elements][:, :ds][(slice(None),) + extra]
            out.append(np.sum(np.einsum("...ja,...j->...a", tabs[2][..., :ds], cc) / hs**2, axis=-1))
        return tuple(out)

    def reference_coords(self, elements, points):
        mesh = self.mesh
        xi = (points - mesh.anchors[elements]) / mesh.sizes[elements]
        return np.clip(xi, 0.0, 1.0)

    def __call__(self, points):
        return evaluate(self, points)

    def gradient(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        e = self.mesh.locate(points)
        return self.local(e, self.reference_coords(e, points), derivatives=1)[1]


def evaluate(field: FieldFunction, point):
    """Value of ``field`` at space-time point(s) of shape (ndim,) or (m, ndim)."""
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    e = field.mesh.locate(pts)
    val = field.local(e, field.reference_coords(e, pts), derivatives=0)[0]
    return float(val[0]) if single else val


def interpolate_nodal(source, mesh_or_dofmap, degree: int | None = None) -> FieldFunction:
    """Nodal interpolant.

    ``source`` is a :class:`ProblemSpec` with an exact solution, or a
    callable taking space-time points of shape (..., ndim). Hanging-node
    values are set from their masters so the result is conforming.
    """
    if isinstance(mesh_or_dofmap, DofMap):
        dm = mesh_or_dofmap
    else:
        dm = build_dofmap(mesh_or_dofmap, degree)
    x = dm.node_coords[dm.unconstrained]
    if isinstance(source, ProblemSpec):
        if source.exact is None:
            raise ValueError(f"problem {source.name!r} has no exact solution to interpolate")
        vals = source.exact.value(x[:, :-1], x[:, -1])
    else:
        vals = source(x)
    vals = np.broadcast_to(np.asarray(vals, dtype=float), (len(x),))
    return FieldFunction(dm, dm.prolongation @ vals)
