import numpy as np
import pytest
import scipy.sparse as sp

from stgls.assembly import assemble
from stgls.driver import solve_problem
from stgls.linsolve import SolveConfig, SolverError, estimate_condition, solve
from stgls.mesh import SpaceTimeDomain, uniform_mesh
from stgls.problems import make_problem


@pytest.fixture(scope="module")
def heat_system():
    p = make_problem("heat_mms", dim_space=1)
    system, _ = assemble(uniform_mesh(SpaceTimeDomain(1), 3), p, 1)
    return system


def test_identity_one_iteration():
    b = np.arange(1.0, 6.0)
    x, rep = solve(sp.identity(5, format="csr"), b, SolveConfig(preconditioner="none"))
    np.testing.assert_allclose(x, b)
    assert rep.converged and rep.iterations <= 1


def test_diagonal_two_by_two():
    x, rep = solve(sp.diags([2.0, 3.0]).tocsr(), np.array([2.0, 3.0]), SolveConfig(method="gmres"))
    np.testing.assert_allclose(x, [1.0, 1.0])
    assert rep.converged


@pytest.mark.parametrize("method,pre", [("bicgstab", "none"), ("bicgstab", "jacobi"),
                                        ("gmres", "block-jacobi"), ("gmres", "ilu"),
                                        ("bicgstab", "ilu"), ("direct", "none")])
def test_matches_dense_lu(heat_system, method, pre):
    A = heat_system.matrix
    b = heat_system.rhs
    oracle = np.linalg.solve(A.toarray(), b)
    x, rep = solve(heat_system, None, SolveConfig(method=method, preconditioner=pre, rel_tol=1e-12))
    assert rep.converged
    assert rep.residual <= 1e-12 * 1.0001
    np.testing.assert_allclose(x, oracle, atol=1e-8 * np.abs(oracle).max())


def test_budget_exhaustion_reports_not_converged(heat_system):
    cfg = SolveConfig(method="gmres", preconditioner="none", rel_tol=1e-14, max_iters=2, restart=2)
    x, rep = solve(heat_system, None, cfg)
    assert not rep.converged
    assert np.isfinite(rep.residual) and rep.residual > 1e-14


def test_driver_raises_on_nonconvergence():
    p = make_problem("heat_mms", dim_space=1)
    cfg = SolveConfig(method="gmres", preconditioner="none", rel_tol=1e-14, max_iters=1, restart=1)
    with pytest.raises(SolverError):
        solve_problem(uniform_mesh(p.domain, 3), p, 1, solve_cfg=cfg)


def test_zero_rhs_gives_zero():
    x, rep = solve(sp.identity(3, format="csr"), np.zeros(3))
    np.testing.assert_array_equal(x, 0.0)
    assert rep.converged


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(method="cg")
    with pytest.raises(ValueError):
        SolveConfig(preconditioner="amg")
    with pytest.raises(ValueError):
        SolveConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        solve(sp.identity(3, format="csr"), np.ones(4))


def test_condition_identity_and_diagonal():
    assert estimate_condition(sp.identity(10, format="csr")).kappa == pytest.approx(1.0, rel=1e-6)
    est = estimate_condition(sp.diags([1.0, 100.0]).tocsr())
    assert est.kappa == pytest.approx(100.0, rel=0.01)


def test_condition_matches_dense_svd(heat_system):
    s = np.linalg.svd(heat_system.matrix.toarray(), compute_uv=False)
    est = estimate_condition(heat_system.matrix, iters=500)
    assert est.kappa == pytest.approx(s[0] / s[-1], rel=0.02)
