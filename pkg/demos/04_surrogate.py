"""
A learned stability predictor
=============================

Label a few thousand (configuration, hour) pairs of the 33-bus feeder with
the exact smallest singular value, train the 1-D convolutional predictor,
and plug it into the reconfiguration search in place of the SVD.
"""

import time

import numpy as np

from sdnrvs.network import bundled_case, random_radial
from sdnrvs.reconfig import ObjectiveWeights, two_stage_sbr
from sdnrvs.scenario import case_profile, kmedoids_reduce
from sdnrvs.stability import Evaluator
from sdnrvs.surrogate import Hyperparams, consistency, generate_dataset, predict_batch, train
from sdnrvs.synthetic import synthetic_timeseries

net = bundled_case("ieee33")
prof = case_profile("ieee33")
hours = synthetic_timeseries(net, prof, 168, seed=0)

rng = np.random.default_rng(0)
configs = [random_radial(net, rng) for _ in range(150)]
t0 = time.perf_counter()
data = generate_dataset(net, configs, hours, samples_per_config=20, seed=0)
print(f"{len(data)} labeled pairs in {time.perf_counter() - t0:.1f} s "
      f"({data.train.sum()} train / {data.test.sum()} test)")

t0 = time.perf_counter()
model = train(data, Hyperparams(), seed=0)
md = model.metadata
print(f"trained in {time.perf_counter() - t0:.1f} s, test RMSE {md['test_rmse']:.4f}")

pred = predict_batch(model, data.X[data.test])
print(f"held-out pairwise consistency {consistency(data.y[data.test], pred):.2f} %")

# same search, two index sources
scen = kmedoids_reduce(hours, 5, seed=0)
for ev in (Evaluator.exact(), Evaluator.surrogate(model)):
    t0 = time.perf_counter()
    res = two_stage_sbr(net, scen, ObjectiveWeights(0.5, -0.5), ev)
    print(f"{ev.mode:9s}: open {list(res.opened)}, loss {res.loss * 1e4:.2f} kW, "
          f"index {res.index:.4f}, {time.perf_counter() - t0:.2f} s")
