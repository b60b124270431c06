import numpy as np
import pytest

from stgls.problems import PROBLEMS, make_problem, rotating_field

rng = np.random.default_rng(3)


def sample(n, d):
    return 0.05 + 0.9 * rng.random((n, d)), rng.random(n)


@pytest.mark.parametrize("name,d", [("heat_mms", 1), ("heat_mms", 2), ("advdiff_mms", 1),
                                    ("advdiff_mms", 2), ("gaussian_source", 2)])
def test_exact_callbacks_agree_with_finite_differences(name, d):
    p = make_problem(name, dim_space=d)
    ex = p.exact
    x, t = sample(20, d)
    s = 1e-5
    fd_t = (ex.value(x, t + s) - ex.value(x, t - s)) / (2 * s)
    np.testing.assert_allclose(ex.time_derivative(x, t), fd_t, atol=1e-5)
    g = ex.spatial_gradient(x, t)
    lap = np.zeros(len(x))
    for a in range(d):
        e = np.zeros(d)
        e[a] = s
        up, dn, mid = ex.value(x + e, t), ex.value(x - e, t), ex.value(x, t)
        np.testing.assert_allclose(g[:, a], (up - dn) / (2 * s), atol=1e-5 * max(1, np.abs(g).max()))
        e[a] = 1e-4
        lap += (ex.value(x + e, t) - 2 * mid + ex.value(x - e, t)) / 1e-8
    np.testing.assert_allclose(ex.spatial_laplacian(x, t), lap, rtol=1e-4, atol=1e-3)


def test_heat_values_and_forcing():
    p = make_problem("heat_mms", nu=1e-2, dim_space=2)
    assert p.exact.value(np.array([0.25, 0.25]), 0.0) == pytest.approx(1.0)
    x, t = sample(10, 2)
    np.testing.assert_allclose(p.forcing(x, t), (-1 + 0.08 * np.pi**2) * p.exact.value(x, t), rtol=1e-13)


@pytest.mark.parametrize("name", ["heat_mms", "advdiff_mms", "gaussian_source"])
def test_forcing_consistent_with_pde(name):
    p = make_problem(name)
    x, t = sample(20, 2)
    ex = p.exact
    a = p.advection(x, t)
    lhs = ex.time_derivative(x, t) + np.sum(a * ex.spatial_gradient(x, t), -1) - p.nu * ex.spatial_laplacian(x, t)
    np.testing.assert_allclose(p.forcing(x, t) - lhs, 0.0, atol=1e-10)


def test_rotating_field_divergence_free_and_magnitude():
    x, t = sample(30, 2)
    s = 1e-6
    div = 0.0
    for a in range(2):
        e = np.zeros(2)
        e[a] = s
        div = div + (rotating_field(x + e, t)[:, a] - rotating_field(x - e, t)[:, a]) / (2 * s)
    np.testing.assert_allclose(div, 0.0, atol=1e-8)
    mag = np.linalg.norm(rotating_field(np.array([1.0, 1.0]), 0.0))
    assert mag == pytest.approx(2 * np.pi * np.sqrt(0.5))


def test_rotation_returns_after_one_unit_of_time():
    # integrate the characteristic from the pulse centre with RK4
    x = np.array([1 / 3, 1 / 3])
    n = 2000
    dt = 1.0 / n
    for _ in range(n):
        k1 = rotating_field(x, 0)
        k2 = rotating_field(x + dt / 2 * k1, 0)
        k3 = rotating_field(x + dt / 2 * k2, 0)
        k4 = rotating_field(x + dt * k3, 0)
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    np.testing.assert_allclose(x, [1 / 3, 1 / 3], atol=1e-10)


def test_rotating_gaussian_defaults():
    p = make_problem("rotating_gaussian")
    assert p.nu == 1e-4
    assert p.initial_u0(np.array([1 / 3, 1 / 3])) == pytest.approx(1.0)


def test_rotating_disc_is_indicator_with_high_peclet():
    p = make_problem("rotating_disc")
    assert p.nu == 1e-8
    g = np.linspace(0, 1, 65)
    X, Y = np.meshgrid(g, g)
    vals = p.initial_u0(np.stack([X, Y], -1))
    assert set(np.unique(vals)) == {0.0, 1.0}
    amax = np.linalg.norm(rotating_field(np.array([0.0, 0.0]), 0))
    assert amax / p.nu == pytest.approx(4.4e8, rel=0.02)


def test_gaussian_source_centre_and_defaults():
    p = make_problem("gaussian_source")
    assert (p.nu, p.params["d"]) == (0.01, 0.05)
    assert p.exact.value(np.array([0.5, 0.5]), 0.0) == pytest.approx(1.0)


def test_nonpositive_diffusivity_rejected():
    with pytest.raises(ValueError):
        make_problem("heat_mms", nu=0.0)


def test_unknown_problem_and_bad_dimension():
    with pytest.raises(ValueError):
        make_problem("nope")
    with pytest.raises(ValueError):
        make_problem("rotating_gaussian", dim_space=1)
    assert set(PROBLEMS) == {"heat_mms", "advdiff_mms", "rotating_gaussian", "rotating_disc",
                             "gaussian_source"}
