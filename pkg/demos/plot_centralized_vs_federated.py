"""
Centralized baseline against the federation
===========================================

Pool every client's rows into one training set and compare its MAE with the
federated model on the same pooled test rows. The baseline gets as many
boosting steps as one client performs over the whole federation.
"""

from fedboost import data as D
from fedboost.federation import FedConfig, run_federation
from fedboost.gbt import TrainConfig
from fedboost.metrics import evaluate, train_centralized_baseline

ds = D.select_feature_group(D.min_idle_isolate(D.gen_synthetic()), D.BPF_ONLY)
rounds = 8
train_cfg = TrainConfig(n_estimators=15, learning_rate=0.02, max_depth=4)
base_cfg = TrainConfig(n_estimators=15 * rounds, learning_rate=0.02, max_depth=4)

for seed in (1, 2, 3):
    splits = D.partition(ds, D.PartitionPlan(3, 0.2, split_seed=seed))
    train = D.concat([s.train for s in splits])
    test = D.concat([s.test for s in splits])
    _, base = train_centralized_baseline(train, test, base_cfg)
    fed = run_federation(FedConfig(3, rounds, train_cfg), splits).model
    print(f"seed {seed}: centralized {base.mae:6.2f} W   federated {evaluate(fed, test).mae:6.2f} W"
          f"   ({fed.n_trees} vs {base_cfg.n_estimators} trees)")
