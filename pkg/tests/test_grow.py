import numpy as np
import pytest

from fedboost import data as D
from fedboost.gbt import (
    ConfigError,
    DatasetEmptyError,
    Ensemble,
    TrainConfig,
    grow_tree,
    predict_batch,
    serialize,
    train_local,
)
from fedboost.gbt import fit
from conftest import make_dataset
from oracles import exhaustive_best_split, leaf_members, route_and_sum


def test_single_sample_closed_form_leaf():
    cfg = TrainConfig(reg_lambda=1.0, learning_rate=0.01)
    tree = grow_tree([-2.0], [1.0], np.zeros((1, 1)), cfg)
    assert len(tree.nodes) == 1
    assert tree.nodes[0].leaf_weight == pytest.approx(0.01, abs=1e-15)


def test_zero_gradients_give_single_zero_leaf(rng):
    X = rng.normal(size=(30, 2))
    tree = grow_tree(np.zeros(30), np.ones(30), X, TrainConfig())
    assert len(tree.nodes) == 1 and tree.nodes[0].leaf_weight == 0.0


def test_length_mismatch_is_contract_violation():
    with pytest.raises(ValueError, match="length mismatch"):
        grow_tree([1.0, 2.0], [1.0], np.zeros((2, 1)), TrainConfig())


@pytest.mark.parametrize("seed", range(25))
def test_depth_one_split_matches_exhaustive_enumeration(seed):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(20, 2)), 3)
    g = rng.integers(-40, 40, size=20) / 8.0  # dyadic values keep every partial sum exact
    h = np.ones(20)
    cfg = TrainConfig(max_depth=1, reg_lambda=1.0)
    tree = grow_tree(g, h, X, cfg)
    expected = exhaustive_best_split(X, g, h, 1.0, 0.0, 1.0)
    if expected is None:
        assert len(tree.nodes) == 1
    else:
        root = tree.nodes[0]
        assert (root.split_feature, root.threshold) == expected


def test_ties_prefer_lower_feature_then_lower_threshold():
    # both columns induce the same two candidate partitions
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    g = np.array([-1.0, -1.0, 1.0, 1.0])
    tree = grow_tree(g, np.ones(4), X, TrainConfig(max_depth=1, reg_lambda=0.0, min_child_weight=0.0))
    assert (tree.nodes[0].split_feature, tree.nodes[0].threshold) == (0, 1.5)
    g = np.array([-1.0, 0.0, 0.0, 1.0])  # thresholds 0.5 and 2.5 tie on feature 0
    tree = grow_tree(g, np.ones(4), X, TrainConfig(max_depth=1, reg_lambda=0.0, min_child_weight=0.0))
    assert (tree.nodes[0].split_feature, tree.nodes[0].threshold) == (0, 0.5)


def test_missing_values_join_left_child():
    X = np.array([[np.nan], [0.0], [1.0], [2.0]])
    g = np.array([-3.0, -3.0, 3.0, 3.0])
    tree = grow_tree(g, np.ones(4), X, TrainConfig(max_depth=1, reg_lambda=0.0, learning_rate=1.0))
    root = tree.nodes[0]
    assert root.threshold == 0.5
    assert tree.nodes[root.left_child].leaf_weight == 3.0


def test_min_child_weight_and_gamma_block_splits(rng):
    X = rng.normal(size=(10, 1))
    g = rng.normal(size=10)
    assert len(grow_tree(g, np.ones(10), X, TrainConfig(min_child_weight=6.0)).nodes) == 1
    assert len(grow_tree(g, np.ones(10), X, TrainConfig(min_split_gain=1e6)).nodes) == 1


def test_depth_is_capped(rng):
    X = rng.normal(size=(200, 3))
    tree = grow_tree(rng.normal(size=200), np.ones(200), X, TrainConfig(max_depth=3))
    assert tree.depth <= 3


@pytest.mark.parametrize("seed", range(10))
def test_leaf_weights_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(80, 3))
    X[rng.random(size=X.shape) < 0.05] = np.nan
    g = rng.normal(size=80)
    h = rng.uniform(0.5, 2.0, size=80)
    cfg = TrainConfig(max_depth=4, reg_lambda=0.7, learning_rate=0.3)
    tree = grow_tree(g, h, X, cfg)
    for leaf, rows in leaf_members(tree, X).items():
        expected = -sum(g[rows]) / (sum(h[rows]) + 0.7) * 0.3
        assert abs(tree.nodes[leaf].leaf_weight - expected) <= 1e-9


def test_train_local_returns_n_estimators_trees(rng):
    trees = train_local(Ensemble(), make_dataset(rng), TrainConfig(n_estimators=100, max_depth=2))
    assert len(trees) == 100
    assert [t.tree_id for t in trees] == list(range(100))
    assert [t.iteration_tag for t in trees] == list(range(100))


def test_train_local_continues_iteration_tags(rng):
    data = make_dataset(rng)
    cfg = TrainConfig(n_estimators=3, max_depth=2)
    warm = fit(data, cfg)
    trees = train_local(warm, data, cfg)
    assert [t.iteration_tag for t in trees] == [3, 4, 5]
    assert [t.tree_id for t in trees] == [0, 1, 2]


def test_constant_targets_at_base_score_give_zero_leaves(rng):
    data = make_dataset(rng).with_targets(np.full(50, 7.5))
    trees = train_local(Ensemble(7.5), data, TrainConfig(n_estimators=5, reg_lambda=0.0))
    assert all(len(t.nodes) == 1 and t.nodes[0].leaf_weight == 0.0 for t in trees)


def test_empty_dataset_rejected():
    empty = D.Dataset(np.zeros((0, 2)), [], [], [], ("a", "b"))
    with pytest.raises(DatasetEmptyError):
        train_local(Ensemble(), empty, TrainConfig())


def test_training_mse_non_increasing_per_tree(rng):
    data = make_dataset(rng, n=50)
    trees = train_local(Ensemble(), data, TrainConfig(n_estimators=3, max_depth=2, learning_rate=0.5))
    mses = []
    for k in range(4):
        preds = [route_and_sum(0.0, trees[:k], x) for x in data.features]
        mses.append(float(np.mean((np.array(preds) - data.targets) ** 2)))
    assert all(b <= a for a, b in zip(mses, mses[1:]))


def test_warm_start_equals_continued_training(rng):
    """Two calls of 5 trees build the same model as one call of 10."""
    data = make_dataset(rng)
    cfg5 = TrainConfig(n_estimators=5, max_depth=3, learning_rate=0.2)
    cfg10 = TrainConfig(n_estimators=10, max_depth=3, learning_rate=0.2)
    once = fit(data, cfg10)
    half = fit(data, cfg5)
    twice = half.append_round(train_local(half, data, cfg5))
    assert [t.nodes for t in once.trees] == [t.nodes for t in twice.trees]
    np.testing.assert_array_equal(predict_batch(once, data.features), predict_batch(twice, data.features))


def test_training_is_deterministic(rng):
    data = make_dataset(rng)
    cfg = TrainConfig(n_estimators=10, max_depth=4, seed=3)
    assert serialize(fit(data, cfg)) == serialize(fit(data, cfg))


@pytest.mark.parametrize("kwargs", [
    {"n_estimators": 0}, {"learning_rate": 0.0}, {"learning_rate": 1.5}, {"max_depth": 0},
    {"reg_lambda": -1.0}, {"min_split_gain": -0.1}, {"min_child_weight": -1.0},
])
def test_train_config_invariants(kwargs):
    with pytest.raises(ConfigError):
        TrainConfig(**kwargs)
