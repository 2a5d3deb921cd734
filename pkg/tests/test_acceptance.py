"""Acceptance criteria, one test each.

Every test prints a single ``[ACCEPT n] PASS|FAIL ...`` line (visible under
``pytest -v``) and then asserts the criterion at its stated tolerance and
time budget.
"""

import time

import numpy as np
import pytest

from fedboost import data as D
from fedboost.experiment import load_spec, run_experiment
from fedboost.federation import (
    FedConfig,
    FederatedClient,
    FederatedServer,
    InProcessTransport,
    run_federation,
)
from fedboost.gbt import (
    Ensemble,
    TrainConfig,
    deserialize,
    fit,
    grow_tree,
    serialize,
    train_local,
)
from fedboost.metrics import compute_metrics, read_report_csv
from conftest import CONFIG_DIR, make_dataset
from oracles import (
    exhaustive_best_split,
    leaf_members,
    random_tree,
    route_and_sum,
    sample_shaped,
    streaming_metrics,
    wire_field_closure,
)

SEEDS = (1, 2, 3)


@pytest.fixture
def verdict(capsys):
    def emit(n, title, ok, elapsed, budget, detail):
        ok = bool(ok) and elapsed < budget
        with capsys.disabled():
            print(f"\n[ACCEPT {n}] {'PASS' if ok else 'FAIL'} {title}: {detail} "
                  f"({elapsed:.2f}s, budget {budget:.0f}s)")
        return ok
    return emit


@pytest.fixture(scope="module")
def replica_run(tmp_path_factory):
    """Replica config on the reference data, all three seeds, run once."""
    out = tmp_path_factory.mktemp("accept") / "replica"
    t0 = time.perf_counter()
    run_experiment(load_spec(CONFIG_DIR / "paper_replica.toml"), out)
    return out, time.perf_counter() - t0


def test_1_one_client_equivalence(reference_dataset, verdict):
    split, = D.partition(reference_dataset, D.PartitionPlan(1, 0.2, 1))
    cfg = TrainConfig(n_estimators=100, learning_rate=0.01, seed=1)
    t0 = time.perf_counter()
    fed = serialize(run_federation(FedConfig(1, 1, cfg), [split]).model)
    elapsed = time.perf_counter() - t0
    central = serialize(fit(split.train, cfg))
    ok = verdict(1, "one-client equivalence", fed == central, elapsed, 5,
                 f"{len(fed)} bytes, identical={fed == central}")
    assert ok


class RandomCountClient(FederatedClient):
    """Trains a fresh random number of trees (5-20) every round."""

    def __init__(self, *args, counts):
        super().__init__(*args)
        self.counts = counts

    def fit(self, round_, model):
        self.train_config = TrainConfig(n_estimators=self.counts[round_ - 1], max_depth=3, learning_rate=0.1)
        return super().fit(round_, model)


def test_2_aggregation_law(reference_dataset, verdict):
    rng = np.random.default_rng(2024)
    counts = rng.integers(5, 21, size=(3, 5))
    splits = D.partition(reference_dataset, D.PartitionPlan(3, 0.2, 1))
    t0 = time.perf_counter()
    clients = [RandomCountClient(k, s.train, s.test, TrainConfig(), counts=counts[k].tolist())
               for k, s in enumerate(splits)]
    server = FederatedServer(FedConfig(3, 5), splits[0].train.feature_names)
    transport = InProcessTransport(clients)
    transport.start()
    for _ in range(5):
        server.run_round(transport)
    transport.close()
    elapsed = time.perf_counter() - t0
    model = server.global_model

    running, bounds = 0, []
    for r in range(5):
        bounds.append(running)
        running += int(counts[:, r].sum())
    ids_ok = [t.tree_id for t in model.trees] == list(range(running))
    b = list(model.iteration_boundaries)
    ok = (model.n_trees == running and ids_ok and b == bounds and b[0] == 0
          and all(x < y for x, y in zip(b, b[1:])))
    assert verdict(2, "aggregation law", ok, elapsed, 10,
                   f"T={model.n_trees} oracle={running} boundaries={b}")


def _aggregate_mae_curve(run_dir):
    curves = []
    for s in SEEDS:
        rows = read_report_csv(run_dir / f"seed-{s}" / "rounds.csv")
        curves.append([r["mae"] for r in rows if r["scope"] == "aggregate"])
    return [sum(c) / len(c) for c in zip(*curves)], curves


def test_3_convergence_trend(replica_run, verdict):
    run_dir, elapsed = replica_run
    mean_curve, curves = _aggregate_mae_curve(run_dir)
    tail = mean_curve[1:]  # from round 2 on
    monotone = all(b <= a for a, b in zip(tail, tail[1:]))
    halved = mean_curve[-1] <= 0.5 * mean_curve[0]
    per_seed = all(all(b <= a for a, b in zip(c[1:], c[2:])) and c[-1] <= 0.5 * c[0] for c in curves)
    curve = ", ".join(f"{v:.1f}" for v in mean_curve)
    assert verdict(3, "convergence trend", monotone and halved and per_seed, elapsed, 180,
                   f"seed-mean aggregated MAE [{curve}], final/first={mean_curve[-1] / mean_curve[0]:.3f}")


def test_4_federated_vs_centralized_parity(replica_run, verdict):
    run_dir, elapsed = replica_run
    fed_pooled, fed_agg, base = [], [], []
    for s in SEEDS:
        final = {r["scope"]: r for r in read_report_csv(run_dir / f"seed-{s}" / "final.csv")}
        fed_pooled.append(final["pooled"]["mae"])
        fed_agg.append(final["aggregate"]["mae"])
        base.append(read_report_csv(run_dir / f"seed-{s}" / "baseline.csv")[0]["mae"])
    fed, agg, cen = np.mean(fed_pooled), np.mean(fed_agg), np.mean(base)
    ok = fed <= 1.15 * cen and agg <= 1.15 * cen
    assert verdict(4, "federated vs centralized parity", ok, elapsed, 300,
                   f"federated pooled MAE {fed:.2f} (client mean {agg:.2f}) vs baseline {cen:.2f}, "
                   f"ratio {fed / cen:.3f} <= 1.15")


def test_5_metric_oracle(verdict):
    rng = np.random.default_rng(5)
    y = rng.uniform(-50, 400, 10_000)
    y[::997] = 0.0  # exercise the MAPE exclusion
    p = y + rng.normal(0, 20, 10_000)
    t0 = time.perf_counter()
    rep = compute_metrics(p, y)
    hand = [compute_metrics([1.0, 2.0, 5.0], [1.0, 2.0, 5.0]),
            compute_metrics([2.0, 4.0], [3.0, 3.0]),
            compute_metrics([1.0, 3.0], [0.0, 2.0])]
    elapsed = time.perf_counter() - t0
    ref = streaming_metrics(p.tolist(), y.tolist())
    worst = max(abs(getattr(rep, k) - ref[k]) / abs(ref[k]) for k in ref)
    hand_ok = ((hand[0].mae, hand[0].mse, hand[0].rmse, hand[0].mape, hand[0].r2) == (0.0, 0.0, 0.0, 0.0, 1.0)
               and (hand[1].mae, hand[1].mse, hand[1].rmse, hand[1].r2) == (1.0, 1.0, 1.0, None)
               and abs(hand[1].mape - 100 / 3) < 1e-12 and hand[2].mape == 50.0)
    assert verdict(5, "metric oracle", worst <= 1e-12 and hand_ok, elapsed, 1,
                   f"worst relative error {worst:.2e} over 10000 pairs, hand cases {hand_ok}")


def test_6_gbdt_kernel(verdict):
    t0 = time.perf_counter()
    # (a) leaf weights
    worst_leaf = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(80, 3))
        X[rng.random(size=X.shape) < 0.05] = np.nan
        g, h = rng.normal(size=80), rng.uniform(0.5, 2.0, size=80)
        tree = grow_tree(g, h, X, TrainConfig(max_depth=4, reg_lambda=0.7, learning_rate=0.3))
        for leaf, rows in leaf_members(tree, X).items():
            expected = -sum(g[rows]) / (sum(h[rows]) + 0.7) * 0.3
            worst_leaf = max(worst_leaf, abs(tree.nodes[leaf].leaf_weight - expected))
    # (b) depth-1 splits
    split_mismatch = 0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        X = np.round(rng.normal(size=(20, 3)), 2)
        g = rng.integers(-40, 40, size=20) / 8.0
        tree = grow_tree(g, np.ones(20), X, TrainConfig(max_depth=1))
        expected = exhaustive_best_split(X, g, np.ones(20), 1.0, 0.0, 1.0)
        got = None if len(tree.nodes) == 1 else (tree.nodes[0].split_feature, tree.nodes[0].threshold)
        split_mismatch += got != expected
    # (c) training MSE per appended tree, scored by the independent router
    increases = 0
    for seed in range(100):
        rng = np.random.default_rng(2000 + seed)
        data = make_dataset(rng, n=int(rng.integers(10, 60)), d=int(rng.integers(1, 5)))
        cfg = TrainConfig(n_estimators=8, max_depth=int(rng.integers(1, 5)),
                          learning_rate=float(rng.uniform(0.05, 1.0)), reg_lambda=float(rng.uniform(0, 3)))
        trees = train_local(Ensemble(), data, cfg)
        prev = None
        for k in range(len(trees) + 1):
            preds = np.array([route_and_sum(0.0, trees[:k], x) for x in data.features])
            mse = float(np.mean((preds - data.targets) ** 2))
            if prev is not None and mse > prev * (1 + 1e-12):
                increases += 1
            prev = mse
    elapsed = time.perf_counter() - t0
    ok = worst_leaf <= 1e-9 and split_mismatch == 0 and increases == 0
    assert verdict(6, "GBDT kernel", ok, elapsed, 30,
                   f"(a) worst leaf error {worst_leaf:.1e} (b) {split_mismatch}/50 split mismatches "
                   f"(c) {increases} MSE increases over 100 datasets")


def test_7_serialization_and_transport(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    trees = tuple(random_tree(rng, 6, max_depth=6, tree_id=i, iteration_tag=i // 50) for i in range(500))
    model = Ensemble(float(rng.normal()), trees, tuple(range(0, 500, 50)), tuple(f"f{j}" for j in range(6)))
    blob = serialize(model)
    again = deserialize(blob)
    codec_ok = again == model and serialize(again) == blob

    spec = load_spec(CONFIG_DIR / "quick.toml")
    dataset = D.select_feature_group(D.min_idle_isolate(D.gen_synthetic(spec.generator)), D.BPF_ONLY)
    splits = D.partition(dataset, spec.partition_plan(1))
    a = serialize(run_federation(spec.fed_config(1), splits).model)
    tcp_cfg = spec.fed_config(1)
    from dataclasses import replace
    b = serialize(run_federation(replace(tcp_cfg, transport="tcp"), splits).model)
    elapsed = time.perf_counter() - t0
    assert verdict(7, "serialization and transport", codec_ok and a == b, elapsed, 30,
                   f"500-tree re-serialization identical={codec_ok}, tcp==in-process={a == b} ({len(a)} bytes)")


def test_8_privacy_by_schema(verdict):
    from fedboost.federation import wire

    t0 = time.perf_counter()
    closure = wire_field_closure(wire.MESSAGE_BODIES, wire.COMPOSITE_TYPES)
    leaks = [p for p, k in closure if sample_shaped(p, k)]
    # a body carrying samples is rejected even when the rest is valid
    probe = wire.hello(0).replace(b'"client_id":0', b'"client_id":0,"samples":[[1.0,2.0]]')
    try:
        wire.decode(probe)
        rejected = False
    except wire.ProtocolError:
        rejected = True
    elapsed = time.perf_counter() - t0
    assert verdict(8, "privacy by schema", not leaks and rejected, elapsed, 1,
                   f"{len(closure)} fields across {len(wire.MESSAGE_BODIES)} message types, "
                   f"sample-shaped={leaks}, injected samples rejected={rejected}")
