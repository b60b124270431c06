import numpy as np
import pytest

from stgls.assembly import FieldFunction, build_dofmap, evaluate, interpolate_nodal
from stgls.driver import solve_problem
from stgls.estimate import (element_residual, error_norms, estimate, face_jump, profile_peak,
                            sample_profile)
from stgls.linsolve import SolveConfig
from stgls.mesh import SpaceTimeDomain, balance_2to1, enumerate_faces, refine, uniform_mesh
from stgls.problems import ExactSolution, ProblemSpec, from_exact_solution, make_problem

D1 = SpaceTimeDomain(dim_space=1)
D2 = SpaceTimeDomain(dim_space=2)


def _zeros(x, t=None):
    return np.zeros(np.shape(x)[:-1])


def constant_forcing_problem(value=1.0, nu=0.1):
    return ProblemSpec("unit_load", 1, nu, lambda x, t: np.zeros(np.shape(x)),
                       lambda x, t: np.full(np.shape(x)[:-1], value), _zeros, _zeros)


def xt_problem(nu=0.05, velocity=0.6):
    ex = ExactSolution(lambda x, t: x[..., 0] * t,
                       lambda x, t: x[..., 0] + 0 * t,
                       lambda x, t: (np.asarray(t) + 0 * x[..., 0])[..., None],
                       lambda x, t: np.zeros(np.shape(x)[:-1]))
    return from_exact_solution("xt", 1, nu, lambda x, t: np.full(np.shape(x), velocity), ex)


def test_residual_vanishes_for_in_space_solution():
    p = xt_problem()
    f = interpolate_nodal(p, uniform_mesh(D1, 2), 1)
    for e in range(len(f.mesh)):
        _, r = element_residual(f, p, e)
        np.testing.assert_allclose(r, 0.0, atol=1e-13)


def test_residual_of_zero_field_is_the_load():
    p = constant_forcing_problem()
    mesh = uniform_mesh(D1, 2)
    f = FieldFunction(build_dofmap(mesh, 1), np.zeros(25))
    _, r = element_residual(f, p, 3)
    np.testing.assert_allclose(r, 1.0)


def test_residual_matches_finite_difference_oracle():
    # central differences are exact on the per-axis quadratics of a Q2 field
    p = make_problem("advdiff_mms", nu=0.03, dim_space=1)
    mesh = uniform_mesh(D1, 2)
    dm = build_dofmap(mesh, 2)
    f = FieldFunction(dm, np.random.default_rng(4).standard_normal(dm.n_nodes))
    e = 6
    pts, r = element_residual(f, p, e)
    s = 0.01
    ex, et = np.array([s, 0.0]), np.array([0.0, s])

    def u(points):
        return f.local(np.full(len(points), e), f.reference_coords(np.full(len(points), e), points), 0)[0]

    ux = (u(pts + ex) - u(pts - ex)) / (2 * s)
    ut = (u(pts + et) - u(pts - et)) / (2 * s)
    uxx = (u(pts + ex) - 2 * u(pts) + u(pts - ex)) / s**2
    x, t = pts[:, :1], pts[:, 1]
    oracle = p.forcing(x, t) - (ut + p.advection(x, t)[:, 0] * ux - p.nu * uxx)
    np.testing.assert_allclose(r, oracle, atol=1e-9)


def test_jump_of_slopes_one_and_three():
    nu = 1.0
    mesh = uniform_mesh(D1, 1)
    f = interpolate_nodal(lambda q: np.where(q[..., 0] < 0.5, q[..., 0], 0.5 + 3 * (q[..., 0] - 0.5)), mesh, 1)
    faces = [fc for fc in enumerate_faces(mesh) if not fc.is_boundary and fc.axis == 0]
    assert len(faces) == 2
    for fc in faces:
        j = face_jump(f, fc, nu)
        np.testing.assert_allclose(np.abs(j), 2 * nu, atol=1e-12)
        swapped = type(fc)(fc.neighbors[0], (fc.owner,), fc.axis, -fc.orientation)
        np.testing.assert_allclose(face_jump(f, swapped, nu), -j, atol=1e-12)


def test_jumps_vanish_for_linear_fields_and_time_faces():
    mesh = balance_2to1(refine(uniform_mesh(D2, 1), [uniform_mesh(D2, 1).ids[2]]))
    f = interpolate_nodal(lambda q: 2 * q[..., 0] - q[..., 1] + 5 * q[..., 2], mesh, 1)
    faces = [fc for fc in enumerate_faces(mesh) if not fc.is_boundary]
    assert any(fc.conformity == "hanging" for fc in faces)
    for fc in faces:
        np.testing.assert_allclose(face_jump(f, fc, 0.3), 0.0, atol=1e-12)
    g = interpolate_nodal(lambda q: q[..., 2] ** 2 + np.sin(q[..., 2]), mesh, 2)
    for fc in faces:
        if fc.axis == 2:
            np.testing.assert_array_equal(face_jump(g, fc, 0.3), 0.0)


def test_single_element_unit_residual():
    p = constant_forcing_problem()
    mesh = uniform_mesh(D1, 0)
    f = FieldFunction(build_dofmap(mesh, 1), np.zeros(4))
    rep = estimate(f, p)
    assert rep.eta_K[0] == pytest.approx(1.0)
    assert rep.jump_part[0] == 0.0


def test_eta_zero_when_solution_in_space():
    p = xt_problem()
    mesh = balance_2to1(refine(uniform_mesh(D1, 2), [uniform_mesh(D1, 2).ids[5]]))
    sol = solve_problem(mesh, p, 1, solve_cfg=SolveConfig(method="direct", rel_tol=1e-12))
    assert estimate(sol.field, p).eta <= 1e-8


def test_eta_is_sum_of_parts_and_decreases():
    p = make_problem("heat_mms", dim_space=1)
    etas = []
    for lev in (2, 3, 4):
        sol = solve_problem(uniform_mesh(D1, lev), p)
        rep = estimate(sol.field, p)
        assert np.all(rep.residual_part >= 0) and np.all(rep.jump_part >= 0)
        np.testing.assert_allclose(rep.eta_K**2, rep.residual_part + rep.jump_part, rtol=1e-12)
        assert rep.eta**2 == pytest.approx(np.sum(rep.eta_K**2), rel=1e-12)
        # each face term is split evenly between its two sides
        assert rep.jump_part.sum() == pytest.approx(rep.face_terms.sum(), rel=1e-12)
        etas.append(rep.eta)
    assert etas[0] > etas[1] > etas[2]


def test_error_norms_of_in_space_interpolant_vanish():
    p = xt_problem()
    f = interpolate_nodal(p, uniform_mesh(D1, 2), 1)
    err = error_norms(f, p)
    assert max(err.err_l2, err.err_h, err.err_h_star) < 1e-13


def test_constant_error_only_on_final_trace():
    zero = ExactSolution(_zeros, _zeros, lambda x, t: np.zeros(np.shape(x)), _zeros)
    p = from_exact_solution("zero", 2, 0.1, lambda x, t: np.zeros(np.shape(x)), zero)
    c = -0.7
    f = interpolate_nodal(lambda q: np.full(len(q), c), uniform_mesh(D2, 1), 1)
    err = error_norms(f, p)
    assert err.err_h == pytest.approx(abs(c) * 1.0)
    assert err.err_l2 == pytest.approx(abs(c))
    assert err.err_grad == pytest.approx(0.0, abs=1e-14)


def test_error_norms_require_exact_solution():
    p = make_problem("rotating_gaussian")
    f = interpolate_nodal(lambda q: np.zeros(len(q)), uniform_mesh(D2, 1), 1)
    with pytest.raises(NotImplementedError):
        error_norms(f, p)


def test_profile_constant_and_endpoints():
    mesh = uniform_mesh(D2, 2)
    c = interpolate_nodal(lambda q: np.full(len(q), 2.5), mesh, 1)
    arc, vals = sample_profile(c, (0, 0.5, 0.3), (1, 0.5, 0.3), 11)
    np.testing.assert_allclose(vals, 2.5)
    assert arc[-1] == pytest.approx(1.0)
    f = interpolate_nodal(lambda q: np.sin(q[..., 0] + 2 * q[..., 1]) * q[..., 2], mesh, 2)
    start, end = (0.1, 0.2, 0.9), (0.8, 0.6, 0.9)
    _, v = sample_profile(f, start, end, 7)
    assert v[0] == pytest.approx(evaluate(f, start))
    assert v[-1] == pytest.approx(evaluate(f, end))
    with pytest.raises(ValueError):
        sample_profile(f, (0, 0, 0), (1.2, 0, 0))


def test_profile_peak_refines_parabola():
    s = np.linspace(0, 1, 11)
    loc, height = profile_peak(s, 3 - (s - 0.537) ** 2)
    assert loc == pytest.approx(0.537, abs=1e-12)
    assert height == pytest.approx(3.0, abs=1e-12)
