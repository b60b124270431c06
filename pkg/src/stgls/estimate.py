"""Residual-based error indicators and error norms for space-time fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import FieldFunction, GlsParams, element_quadrature
from .basis import gauss_rule
from .mesh import Face, SpaceTimeMesh
from .problems import ProblemSpec

__all__ = [
    "EstimatorReport",
    "ErrorReport",
    "element_residual",
    "profile_peak",
    "face_jump",
    "estimate",
    "error_norms",
    "discrete_norm_squared",
    "sample_profile",
]


@dataclass(eq=False)
class EstimatorReport:
    """Per-element indicators ``eta_K`` and their global combination.

    ``residual_part`` holds ``h_K^2 ||r||_K^2`` and ``jump_part`` holds
    ``1/2 sum_E h_E ||j||_E^2`` for each element. ``face_terms`` lists
    ``h_E ||j||_E^2`` per interior (sub-)face.
    """

    eta_K: np.ndarray
    residual_part: np.ndarray
    jump_part: np.ndarray
    face_terms: np.ndarray
    effectivity: float | None = None

    @property
    def eta(self) -> float:
        return float(np.sqrt(np.sum(self.eta_K**2)))


@dataclass(frozen=True)
class ErrorReport:
    err_l2: float
    err_h: float
    err_h_star: float
    err_gamma_T: float
    err_grad: float
    err_stab: float
    err_dt: float


def _coefficients(field: FieldFunction, elements):
    return field.coeffs[field.dofmap.element_nodes[elements]]


def _field_at_quadrature(field, eq):
    c = _coefficients(field, eq.elements)
    u = np.einsum("qj,ej->eq", eq.phi, c)
    grad = np.einsum("eqja,ej->eqa", eq.grad, c)
    lap = np.einsum("eqj,ej->eq", eq.lap, c)
    return u, grad, lap


def _residual_blocks(field, problem, gls, q=None):
    ds = problem.dim_space
    for eq in element_quadrature(field.mesh, problem, field.degree, gls, q=q):
        u, grad, lap = _field_at_quadrature(field, eq)
        x, t = eq.points[..., :ds], eq.points[..., -1]
        f = np.asarray(problem.forcing(x, t), dtype=float)
        mu = grad[..., -1] + np.sum(eq.advection * grad[..., :ds], axis=-1) - problem.nu * lap
        yield eq, f - mu


def element_residual(field: FieldFunction, problem: ProblemSpec, element: int, q: int | None = None):
    """PDE residual ``f - M u_h`` at the quadrature points of one element.

    ``element`` is a row position in the mesh. Returns ``(points, r)``.
    """
    mesh = field.mesh
    q = field.degree + 2 if q is None else q
    rule = gauss_rule(q, mesh.ndim)
    pts = mesh.anchors[element] + rule.points * mesh.sizes[element]
    e = np.full(len(pts), element)
    xi = np.broadcast_to(rule.points, pts.shape)
    _, grad, lap = field.local(e, xi, derivatives=2)
    ds = mesh.dim_space
    x, t = pts[:, :ds], pts[:, -1]
    a = np.asarray(problem.advection(x, t), dtype=float)
    mu = grad[:, -1] + np.sum(a * grad[:, :ds], axis=-1) - problem.nu * lap
    return pts, np.asarray(problem.forcing(x, t), dtype=float) - mu


def _face_points(mesh: SpaceTimeMesh, small, axis, on_upper, q):
    """Quadrature points and weights-times-area on faces of ``small``."""
    ndim = mesh.ndim
    rule = gauss_rule(q, ndim - 1)
    nqf = len(rule.weights)
    ref = np.empty((nqf, ndim))
    others = [b for b in range(ndim) if b != axis]
    ref[:, others] = rule.points
    ref[:, axis] = 1.0 if on_upper else 0.0
    pts = mesh.anchors[small][:, None, :] + ref[None] * mesh.sizes[small][:, None, :]
    area = mesh.volumes[small] / mesh.sizes[small, axis]
    return pts, rule.weights[None, :] * area[:, None]


def _interior_jumps(field: FieldFunction, q=None):
    """Jump data for every interior sub-face normal to a spatial axis.

    Returns ``(lo, hi, small, wa, dgrad)`` where ``dgrad`` holds
    ``d_a u_lo - d_a u_hi`` at face quadrature points.
    """
    mesh = field.mesh
    q = field.degree + 2 if q is None else q
    adj = mesh.face_adjacency
    out = []
    for a in range(mesh.dim_space):
        sel = np.flatnonzero(adj["axis"] == a)
        if len(sel) == 0:
            continue
        lo, hi, small = adj["lo"][sel], adj["hi"][sel], adj["small"][sel]
        upper = small == lo
        pts = np.empty((len(sel), q ** (mesh.ndim - 1), mesh.ndim))
        wa = np.empty(pts.shape[:2])
        for flag in (True, False):
            s = upper == flag
            if np.any(s):
                pts[s], wa[s] = _face_points(mesh, small[s], a, flag, q)
        g_lo = field.local(lo, field.reference_coords(lo[:, None], pts), derivatives=1)[1][..., a]
        g_hi = field.local(hi, field.reference_coords(hi[:, None], pts), derivatives=1)[1][..., a]
        out.append((lo, hi, small, wa, g_lo - g_hi))
    return out


def face_jump(field: FieldFunction, face: Face, nu: float, q: int | None = None) -> np.ndarray:
    """Flux jump ``-nu (d_n u_owner - d_n u_neighbor)`` at face quadrature points.

    The normal is the fixed axis direction, so exchanging owner and neighbor
    negates the result. Boundary faces and faces normal to the time axis
    give zeros. Hanging faces are integrated on each fine sub-face.
    """
    mesh = field.mesh
    q = field.degree + 2 if q is None else q
    nqf = q ** (mesh.ndim - 1)
    if face.is_boundary or face.axis == mesh.ndim - 1:
        return np.zeros(nqf * max(1, len(face.neighbors)))
    owner = int(mesh.positions_of([face.owner])[0])
    nbrs = mesh.positions_of(list(face.neighbors))
    vals = []
    for nb in nbrs:
        small = nb if mesh.levels[nb] > mesh.levels[owner] else owner
        # the face sits on the small element's side facing the other one
        other = owner if small == nb else nb
        on_upper = mesh.anchors[other, face.axis] > mesh.anchors[small, face.axis]
        pts, _ = _face_points(mesh, np.array([small]), face.axis, bool(on_upper), q)
        go = field.local(np.array([owner]), field.reference_coords(np.array([[owner]]), pts), 1)[1]
        gn = field.local(np.array([nb]), field.reference_coords(np.array([[nb]]), pts), 1)[1]
        vals.append(-nu * (go[0, :, face.axis] - gn[0, :, face.axis]))
    return np.concatenate(vals)


def estimate(field: FieldFunction, problem: ProblemSpec, mesh: SpaceTimeMesh | None = None,
             gls: GlsParams = GlsParams()) -> EstimatorReport:
    """Residual indicator ``eta_K^2 = h_K^2 ||r||_K^2 + 1/2 sum_E h_E ||j||_E^2``.

    Each interior sub-face gives half of ``h_E ||j||_E^2`` to both adjacent
    elements, with ``h_E`` the size of the finer side. Boundary faces carry
    no jump.
    """
    mesh = field.mesh if mesh is None else mesh
    n = len(mesh)
    res = np.zeros(n)
    for eq, r in _residual_blocks(field, problem, gls):
        res[eq.elements] = mesh.h[eq.elements] ** 2 * np.sum(eq.jxw * r**2, axis=1)
    jump = np.zeros(n)
    face_terms = []
    for lo, hi, small, wa, dj in _interior_jumps(field):
        term = mesh.h[small] * np.sum(wa * (problem.nu * dj) ** 2, axis=1)
        face_terms.append(term)
        np.add.at(jump, lo, 0.5 * term)
        np.add.at(jump, hi, 0.5 * term)
    face_terms = np.concatenate(face_terms) if face_terms else np.zeros(0)
    report = EstimatorReport(np.sqrt(res + jump), res, jump, face_terms)
    if problem.exact is not None:
        err = error_norms(field, problem, gls=gls)
        report.effectivity = report.eta / err.err_h_star if err.err_h_star > 0 else float("inf")
    return report


def _gamma_T_quadrature(field, q):
    mesh = field.mesh
    adj = mesh.face_adjacency
    top = adj["b_elem"][(adj["b_axis"] == mesh.ndim - 1) & (adj["b_side"] == 1)]
    pts, wa = _face_points(mesh, top, mesh.ndim - 1, True, q)
    return top, pts, wa


def discrete_norm_squared(field: FieldFunction, problem: ProblemSpec, gls: GlsParams = GlsParams(),
                          subtract_exact: bool = False, q: int | None = None) -> dict:
    """Squared pieces of the energy norm of ``u_h`` (or of ``u_h - u``).

    Keys: ``gamma_T``, ``grad`` (already times nu), ``stab`` (eps-weighted
    operator residual), ``l2`` and ``dt``.
    """
    ds = problem.dim_space
    nu = problem.nu
    ex = problem.exact if subtract_exact else None
    if subtract_exact and ex is None:
        raise ValueError(f"problem {problem.name!r} has no exact solution")
    parts = dict(gamma_T=0.0, grad=0.0, stab=0.0, l2=0.0, dt=0.0)
    for eq in element_quadrature(field.mesh, problem, field.degree, gls, q=q):
        u, grad, lap = _field_at_quadrature(field, eq)
        if ex is not None:
            x, t = eq.points[..., :ds], eq.points[..., -1]
            u = u - ex.value(x, t)
            grad = grad - np.concatenate([ex.spatial_gradient(x, t), ex.time_derivative(x, t)[..., None]],
                                         axis=-1)
            lap = lap - ex.spatial_laplacian(x, t)
        me = grad[..., -1] + np.sum(eq.advection * grad[..., :ds], axis=-1) - nu * lap
        parts["l2"] += float(np.sum(eq.jxw * u**2))
        parts["grad"] += nu * float(np.sum(eq.jxw[..., None] * grad[..., :ds] ** 2))
        parts["dt"] += float(np.sum(eq.jxw * grad[..., -1] ** 2))
        parts["stab"] += float(np.sum(eq.eps[:, None] * eq.jxw * me**2))
    q = field.degree + 2 if q is None else q
    top, pts, wa = _gamma_T_quadrature(field, q)
    if len(top):
        xi = field.reference_coords(top[:, None], pts)
        v = field.local(top, xi, derivatives=0)[0]
        if ex is not None:
            v = v - ex.value(pts[..., :ds], pts[..., -1])
        parts["gamma_T"] = float(np.sum(wa * v**2))
    return parts


def error_norms(field: FieldFunction, problem: ProblemSpec, mesh: SpaceTimeMesh | None = None,
                gls: GlsParams = GlsParams()) -> ErrorReport:
    """L2, energy and auxiliary-energy norms of ``u_h - u``."""
    if problem.exact is None:
        raise NotImplementedError(f"problem {problem.name!r} has no exact solution")
    p = discrete_norm_squared(field, problem, gls, subtract_exact=True)
    vh2 = p["gamma_T"] + p["grad"] + p["stab"]
    return ErrorReport(err_l2=np.sqrt(p["l2"]), err_h=np.sqrt(vh2), err_h_star=np.sqrt(vh2 + p["dt"]),
                       err_gamma_T=np.sqrt(p["gamma_T"]), err_grad=np.sqrt(p["grad"]),
                       err_stab=np.sqrt(p["stab"]), err_dt=np.sqrt(p["dt"]))


def sample_profile(field, start, end, n_samples: int = 201):
    """Values along a straight space-time segment.

    Returns ``(arc_length, values)``; arc length is measured with the spatial
    coordinates only. ``field`` is anything callable on an (m, ndim) array
    of points that exposes ``mesh.domain`` or ``domain``.
    """
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    domain = field.mesh.domain if hasattr(field, "mesh") else field.domain
    if not (domain.contains(start) and domain.contains(end)):
        raise ValueError("profile segment leaves the domain")
    s = np.linspace(0.0, 1.0, n_samples)
    pts = start[None, :] + s[:, None] * (end - start)[None, :]
    ds = domain.dim_space
    arc = s * np.linalg.norm((end - start)[:ds])
    return arc, np.asarray(field(pts), dtype=float)


def profile_peak(arc_length, values) -> tuple[float, float]:
    """Location and height of the maximum of a sampled profile.

    The discrete argmax is refined by the vertex of the parabola through it
    and its two neighbours.
    """
    s = np.asarray(arc_length, dtype=float)
    u = np.asarray(values, dtype=float)
    i = int(np.argmax(u))
    if 0 < i < len(u) - 1:
        y0, y1, y2 = u[i - 1], u[i], u[i + 1]
        denom = y0 - 2 * y1 + y2
        if denom < 0:
            off = 0.5 * (y0 - y2) / denom
            step = s[i + 1] - s[i]
            return float(s[i] + off * step), float(y1 - 0.25 * (y0 - y2) * off)
    return float(s[i]), float(u[i])
