import numpy as np
import pytest

from stgls.adapt import AdaptConfig, AdaptError, adapt_loop, mark_elements
from stgls.linsolve import SolveConfig
from stgls.mesh import find_hanging_nodes, uniform_mesh
from stgls.problems import make_problem


@pytest.fixture(scope="module")
def pulse_1d():
    return make_problem("gaussian_source", dim_space=1)


def test_infinite_tolerance_gives_single_round(pulse_1d):
    field, trace = adapt_loop(pulse_1d, 1, uniform_mesh(pulse_1d.domain, 3))
    assert len(trace) == 1
    assert trace.reason == "converged"
    assert trace.rounds[0].refined == 0
    assert len(field.mesh) == 64


def test_refinement_concentrates_at_pulse_and_keeps_invariants(pulse_1d):
    cfg = AdaptConfig(eta_tol=2e-3, max_rounds=4, max_level=7)
    field, trace = adapt_loop(pulse_1d, 1, uniform_mesh(pulse_1d.domain, 3), cfg)
    assert len(trace) >= 3
    for rnd in trace:
        assert rnd.mesh.is_balanced()
        for h in find_hanging_nodes(rnd.mesh, 1):
            assert h.weight_sum == pytest.approx(1.0, abs=1e-12)
    fine = field.mesh.levels == field.mesh.max_level
    centers = field.mesh.anchors + 0.5 * field.mesh.sizes
    # the pulse sits at x = 1/2 and decays in time
    assert np.mean(np.abs(centers[fine, 0] - 0.5)) < 0.2
    assert field.mesh.max_level > field.mesh.min_level
    errs = [r.err_l2 for r in trace]
    assert errs[-1] < errs[0]


def test_round_limit_reason(pulse_1d):
    cfg = AdaptConfig(eta_tol=1e-8, max_rounds=1, max_level=10)
    _, trace = adapt_loop(pulse_1d, 1, uniform_mesh(pulse_1d.domain, 2), cfg)
    assert len(trace) == 2
    assert trace.reason == "max_rounds"
    assert trace.rounds[0].refined > 0 and trace.rounds[-1].refined == 0


def test_level_cap_reason(pulse_1d):
    cfg = AdaptConfig(eta_tol=1e-8, max_rounds=20, max_level=4)
    field, trace = adapt_loop(pulse_1d, 1, uniform_mesh(pulse_1d.domain, 3), cfg)
    assert trace.reason == "max_level"
    assert field.mesh.max_level == 4


def test_fixed_fraction_marking_takes_smallest_set():
    mesh = uniform_mesh(make_problem("heat_mms", dim_space=1).domain, 1)
    eta = np.array([0.1, 3.0, 0.2, 1.0])
    marked = mark_elements(mesh, eta, AdaptConfig(marking="fixed_fraction", theta=0.5))
    np.testing.assert_array_equal(marked, [1])
    marked = mark_elements(mesh, eta, AdaptConfig(marking="fixed_fraction", theta=0.95))
    np.testing.assert_array_equal(marked, [1, 3])
    capped = mark_elements(mesh, eta, AdaptConfig(eta_tol=0.05, max_level=1))
    assert len(capped) == 0


def test_solver_failure_carries_partial_trace(pulse_1d):
    cfg = AdaptConfig(eta_tol=1e-8, max_rounds=3)
    bad = SolveConfig(method="gmres", preconditioner="none", rel_tol=1e-14, max_iters=1, restart=1)
    with pytest.raises(AdaptError) as info:
        adapt_loop(pulse_1d, 1, uniform_mesh(pulse_1d.domain, 3), cfg, bad)
    assert info.value.trace.reason == "solver_failure"


def test_config_validation():
    with pytest.raises(ValueError):
        AdaptConfig(eta_tol=0.0)
    with pytest.raises(ValueError):
        AdaptConfig(marking="bulk")
    with pytest.raises(ValueError):
        AdaptConfig(theta=1.5)
