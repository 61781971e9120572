"""
Power flow on the 33-bus feeder
===============================

Solve the base case with Newton-Raphson, check it against the
backward/forward sweep, then watch the smallest singular value of the
Jacobian shrink as the feeder is loaded up.
"""

import numpy as np

from sdnrvs.network import bundled_case
from sdnrvs.oracle import bfs_sweep_pf
from sdnrvs.powerflow import check_limits, jacobian, sigma_min, solve_pf
from sdnrvs.scenario import case_profile, nominal_sample

net = bundled_case("ieee33")
alpha = net.with_open(case_profile("ieee33")["normally_open"])
base = nominal_sample(net)

# base case: tie branches open, peak load, no renewables
sol = solve_pf(net, alpha, base)
print(f"Newton-Raphson: {sol.iterations} iterations, loss {sol.loss * net.base_mva * 1e3:.2f} kW")
print(f"lowest voltage {sol.V.min():.4f} p.u. at bus {int(sol.V.argmin())}")

# the sweep shares no code with the Newton solver
sweep = bfs_sweep_pf(net, alpha, base)
print(f"sweep vs Newton: max |dV| = {np.abs(sweep.V - sol.V).max():.1e}, "
      f"|dloss| = {abs(sweep.loss - sol.loss):.1e}")

# loading the feeder moves it toward voltage collapse
print("\nload factor  V_min   sigma_min  violations")
for s in (0.5, 1.0, 1.5, 2.0, 2.5, 3.0):
    sol = solve_pf(net, alpha, base.scaled(load=s))
    if not sol.converged:
        print(f"{s:10.1f}  no solution")
        break
    print(f"{s:10.1f}  {sol.V.min():.4f}  {sigma_min(jacobian(net, alpha, sol)):9.4f}  "
          f"{len(check_limits(sol, net))}")
