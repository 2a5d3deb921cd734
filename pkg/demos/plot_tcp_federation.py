"""
The same federation over sockets
================================

Swap the in-process transport for TCP. Clients run in threads here, but each
only sees length-prefixed JSON frames, and the final model is byte-identical.
"""

from dataclasses import replace

from fedboost import data as D
from fedboost.federation import FedConfig, run_federation, wire
from fedboost.gbt import TrainConfig, serialize

ds = D.select_feature_group(D.min_idle_isolate(D.gen_synthetic()), D.BPF_ONLY)
splits = D.partition(ds, D.PartitionPlan(3, 0.2, split_seed=1))
cfg = FedConfig(3, 3, TrainConfig(n_estimators=10, learning_rate=0.1, max_depth=3))

local = run_federation(cfg, splits)
remote = run_federation(replace(cfg, transport="tcp"), splits)
print("identical models:", serialize(local.model) == serialize(remote.model))

# everything a client may send is declared up front
for msg_type, fields in wire.MESSAGE_BODIES.items():
    print(f"{msg_type:14s} {fields}")
