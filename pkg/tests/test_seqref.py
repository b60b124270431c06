import numpy as np
import pytest
import scipy.linalg as sla

from stgls.problems import ProblemSpec, make_problem
from stgls.seqref import SpatialFESpace, TimeMarchConfig, crank_nicolson


def _zero(x, t=None):
    return np.zeros(np.shape(x)[:-1])


def sine_decay(nu):
    return ProblemSpec("sine", 1, nu, lambda x, t: np.zeros(np.shape(x)), _zero, _zero,
                       lambda x: np.sin(np.pi * x[..., 0]))


def test_one_step_matches_discrete_amplification_factor():
    nu, level, steps = 0.1, 5, 32
    p = sine_decay(nu)
    res = crank_nicolson(p, TimeMarchConfig(level, steps=steps), snapshot_times=(0.0, 1 / steps))
    dt = res.dt
    space = res.final.space
    M, A = space.assemble(nu, p.advection)
    inner = np.setdiff1d(np.arange(space.n_nodes), space.boundary)
    lam, vecs = sla.eigh(A[inner][:, inner].toarray(), M[inner][:, inner].toarray())
    # the nodal sine is the lowest discrete mode; pick it by overlap
    u0 = res.snapshots[0.0].coeffs[inner]
    mode = np.argmax(np.abs(vecs.T @ M[inner][:, inner] @ u0))
    g_discrete = (1 - lam[mode] * dt / 2) / (1 + lam[mode] * dt / 2)
    u1 = res.snapshots[1 / steps].coeffs[inner]
    np.testing.assert_allclose(u1, g_discrete * u0, atol=1e-12)
    g_cont = (1 - nu * np.pi**2 * dt / 2) / (1 + nu * np.pi**2 * dt / 2)
    assert g_discrete == pytest.approx(g_cont, abs=1e-3)


def test_second_order_in_time():
    p = make_problem("heat_mms", nu=1e-2, dim_space=1)
    finals = [crank_nicolson(p, TimeMarchConfig(4, steps=s)).final.coeffs for s in (8, 16, 32)]
    d1 = np.linalg.norm(finals[0] - finals[1])
    d2 = np.linalg.norm(finals[1] - finals[2])
    assert np.log2(d1 / d2) == pytest.approx(2.0, abs=0.15)


def test_boundary_values_and_snapshots():
    p = make_problem("heat_mms", nu=1e-2, dim_space=2)
    res = crank_nicolson(p, TimeMarchConfig(3), snapshot_times=(0.0, 0.5, 1.0))
    assert set(res.snapshots) == {0.0, 0.5, 1.0}
    sp = res.final.space
    x = sp.node_coords[sp.boundary]
    np.testing.assert_allclose(res.final.coeffs[sp.boundary], p.exact.value(x, np.ones(len(x))), atol=1e-14)
    np.testing.assert_allclose(res.snapshots[0.0].coeffs, p.initial_u0(sp.node_coords))
    assert len(res.l2_history) == res.steps == 8
    err = np.abs(res.final(sp.node_coords) - p.exact.value(sp.node_coords, np.ones(sp.n_nodes)))
    assert err.max() < 0.05


def test_space_evaluation_and_bounds():
    sp = SpatialFESpace([0.0, 0.0], [1.0, 1.0], 4, 2)
    c = sp.node_coords[:, 0] + 2 * sp.node_coords[:, 1] ** 2
    pts = np.random.default_rng(0).random((20, 2))
    np.testing.assert_allclose(sp.evaluate(c, pts), pts[:, 0] + 2 * pts[:, 1] ** 2, atol=1e-13)
    with pytest.raises(ValueError):
        sp.evaluate(c, [[1.1, 0.5]])


def test_config_validation():
    with pytest.raises(ValueError):
        TimeMarchConfig(-1)
    with pytest.raises(ValueError):
        TimeMarchConfig(3, steps=0)
    assert TimeMarchConfig(5).n_steps == 32
