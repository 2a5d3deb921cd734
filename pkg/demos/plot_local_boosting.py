"""
Local boosting on one node type
===============================

Fit a small ensemble on the synthetic measurement table and watch the test
error fall as trees are added.
"""

import numpy as np

from fedboost import data as D
from fedboost.gbt import TrainConfig, fit, predict_batch
from fedboost.metrics import compute_metrics

# generate, subtract each node type's idle floor, keep the BPF-style counters
ds = D.gen_synthetic(D.GeneratorConfig(D.DEFAULT_NODES, seed=0))
ds = D.select_feature_group(D.min_idle_isolate(ds), D.BPF_ONLY)
print(ds.feature_names, len(ds))

split, = D.partition(ds, D.PartitionPlan(1, 0.2, split_seed=0))
model = fit(split.train, TrainConfig(n_estimators=200, learning_rate=0.05, max_depth=4))

# prefix models share trees, so truncating gives the curve for free
for n in (1, 10, 50, 100, 200):
    pred = predict_batch(model.truncated(n), split.test.features)
    print(f"{n:4d} trees  MAE {compute_metrics(pred, split.test.targets).mae:7.2f} W")

tree = model.trees[0]
print("first tree:", tree.n_leaves, "leaves, depth", tree.depth)
print("mean |target|:", np.mean(np.abs(split.test.targets)))
