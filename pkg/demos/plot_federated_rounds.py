"""
Three clients, bagged trees
===========================

Each client owns one node type. Every round the clients boost on top of the
shared model and the aggregator simply appends all their trees.
"""

from fedboost import data as D
from fedboost.federation import FedConfig, run_federation
from fedboost.gbt import TrainConfig

ds = D.select_feature_group(D.min_idle_isolate(D.gen_synthetic()), D.BPF_ONLY)
splits = D.partition(ds, D.PartitionPlan(3, 0.2, split_seed=1))
for k, s in enumerate(splits):
    print(f"client {k}: {sorted(set(s.train.node_types))}, {len(s.train)} train / {len(s.test)} test")

# all three clients' corrections are summed, so keep each one gentle
cfg = FedConfig(num_clients=3, num_rounds=6,
                train_config=TrainConfig(n_estimators=15, learning_rate=0.02, max_depth=4))
result = run_federation(cfg, splits)

# the logged metrics score the model each client received at the start of the round
for log in result.logs:
    per_client = "  ".join(f"{r.mae:6.2f}" for r in log.client_reports)
    print(f"round {log.round}: {log.global_tree_count:3d} trees  client MAE {per_client}"
          f"  mean {log.aggregate.mae:6.2f}")

print("iteration boundaries:", result.model.iteration_boundaries)
