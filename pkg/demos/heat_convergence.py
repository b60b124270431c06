"""
Convergence of the space-time method on a manufactured heat solution
=====================================================================

The exact solution is a decaying sine, so every error norm can be computed
directly. We refine the space-time mesh uniformly and read off the log-log
slopes of the L2 error, the energy-type error and the residual estimator.
"""

from stgls import convergence_study, loglog_slope, make_problem

# a 1-D heat problem: one space axis plus time
problem = make_problem("heat_mms", nu=1e-2, dim_space=1)

rows = convergence_study(problem, levels=range(3, 7), degree=1)

print(f"{'h':>10} {'dofs':>7} {'eta':>11} {'err_h':>11} {'err_l2':>11}")
for r in rows:
    print(f"{r.h:10.5f} {r.dofs:7d} {r.eta:11.4e} {r.err_h:11.4e} {r.err_l2:11.4e}")

# linear elements: expect about 2 in L2 and about 1 for the others
h = [r.h for r in rows]
for name in ("err_l2", "err_h", "eta"):
    print(f"slope {name}: {loglog_slope(h, [getattr(r, name) for r in rows]):.3f}")

# the estimator tracks the error up to a roughly constant factor
print("effectivity eta/err_h:", " ".join(f"{r.eta / r.err_h:.3f}" for r in rows))
