"""
Effect of stabilization on the conditioning of the space-time system
=====================================================================

For nearly pure advection the plain Galerkin space-time matrix is poorly
conditioned. The least-squares term adds control of the streamline
derivative. We estimate the 2-norm condition number with and without it.
"""

from stgls import GlsParams, assemble, estimate_condition, make_problem, uniform_mesh

problem = make_problem("advdiff_mms", nu=1e-6, dim_space=2)
mesh = uniform_mesh(problem.domain, 3)

for enabled in (True, False):
    system, _ = assemble(mesh, problem, 1, GlsParams(enabled=enabled))
    est = estimate_condition(system.matrix, iters=200)
    label = "with GLS" if enabled else "no GLS"
    print(f"{label:>9}: kappa={est.kappa:8.1f}  sigma_max={est.sigma_max:.3e}  sigma_min={est.sigma_min:.3e}")
