"""
Adaptive refinement around a localized source
==============================================

A narrow Gaussian source switches on in the middle of the domain. Uniform
meshes waste most of their elements far from it. The adaptive loop solves,
estimates, marks elements with a large indicator and refines them, keeping
the mesh 2:1 balanced after every round.
"""

import numpy as np

from stgls import AdaptConfig, adapt_loop, error_norms, make_problem, solve_problem, uniform_mesh
from stgls.driver import loglog_slope

problem = make_problem("gaussian_source", dim_space=1)

cfg = AdaptConfig(eta_tol=2.5e-4, max_rounds=8, max_level=9)
field, trace = adapt_loop(problem, 1, uniform_mesh(problem.domain, 3), cfg)

print("adaptive rounds (stopped by %s)" % trace.reason)
for r in trace:
    print(f"  round {r.round}: {r.dofs:6d} dofs  eta={r.eta:.3e}  err_l2={r.err_l2:.3e}")

# the same budget spent on uniform meshes
uni = []
for lev in range(3, 8):
    sol = solve_problem(uniform_mesh(problem.domain, lev), problem)
    uni.append((sol.system.n, error_norms(sol.field, problem).err_l2))
print("uniform refinement")
for dofs, err in uni:
    print(f"  {dofs:6d} dofs  err_l2={err:.3e}")

# error against dof count: the adaptive curve should fall faster
ad = np.array([(r.dofs, r.err_l2) for r in trace])
print(f"error/dof slope: adaptive {-loglog_slope(ad[:, 0], ad[:, 1]):.2f},"
      f" uniform {-loglog_slope(*zip(*uni)):.2f}")

levels = field.mesh.levels
print("final mesh levels:", {int(l): int(np.sum(levels == l)) for l in np.unique(levels)})
