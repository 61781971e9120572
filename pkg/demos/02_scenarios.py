"""
Hourly samples and representative scenarios
===========================================

Draw a week of synthetic load and renewable output for the 33-bus feeder,
reduce it to a handful of weighted scenarios with k-medoids, and compare
the expected loss under the reduced set with the full week.
"""

import numpy as np

from sdnrvs.network import bundled_case
from sdnrvs.powerflow import expected_loss
from sdnrvs.scenario import ScenarioSet, case_profile, kmedoids_reduce
from sdnrvs.synthetic import synthetic_timeseries

net = bundled_case("ieee33")
prof = case_profile("ieee33")
alpha = net.with_open(prof["normally_open"])

hours = synthetic_timeseries(net, prof, 168, seed=0)
load = np.array([s.p_d.sum() for s in hours])
ren = np.array([s.p_r.sum() for s in hours])
print(f"{len(hours)} hourly samples, load {load.min():.3f}..{load.max():.3f} p.u., "
      f"renewables {ren.min():.3f}..{ren.max():.3f} p.u.")

full, _ = expected_loss(net, alpha, ScenarioSet.uniform(hours))
print(f"mean loss over the week: {full * net.base_mva * 1e3:.2f} kW")

# fewer scenarios, each weighted by the share of hours it stands for
for k in (1, 3, 5, 10, 20):
    scen = kmedoids_reduce(hours, k, seed=0)
    red, _ = expected_loss(net, alpha, scen)
    print(f"k = {k:2d}: expected loss {red * net.base_mva * 1e3:7.2f} kW, "
          f"weights {np.round(scen.pi, 3).tolist() if k <= 5 else '...'}")

# doubling the renewable capacity
hours2 = synthetic_timeseries(net, prof, 168, seed=0, renewable_scale=2.0)
full2, _ = expected_loss(net, alpha, ScenarioSet.uniform(hours2))
print(f"\nwith renewables x2: mean loss {full2 * net.base_mva * 1e3:.2f} kW")
