"""Second-order tree induction and local boosting with squared-error loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tree import DecisionTree, Ensemble, TreeNode, predict_batch


class DatasetEmptyError(ValueError):
    """Training was requested on a dataset with no samples."""


class ConfigError(ValueError):
    """A hyperparameter is outside its admissible range."""


@dataclass(frozen=True)
class TrainConfig:
    n_estimators: int = 100
    learning_rate: float = 0.01
    max_depth: int = 6
    reg_lambda: float = 1.0
    min_split_gain: float = 0.0
    min_child_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n_estimators) < 1:
            raise ConfigError(f"n_estimators must be >= 1, got {self.n_estimators}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if int(self.max_depth) < 1:
            raise ConfigError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.reg_lambda < 0 or self.min_split_gain < 0 or self.min_child_weight < 0:
            raise ConfigError("reg_lambda, min_split_gain and min_child_weight must be non-negative")


def _matrix(data) -> np.ndarray:
    X = getattr(data, "features", data)
    return np.asarray(X, dtype=np.float64)


def leaf_weight(grad_sum: float, hess_sum: float, config: TrainConfig) -> float:
    w = -grad_sum / (hess_sum + config.reg_lambda) * config.learning_rate
    return float(w) + 0.0  # drop negative zero


def _best_split(X, g, h, rows, G, H, config):
    """Best (gain, feature, threshold) over every midpoint split, or None."""
    lam, gamma, mcw = config.reg_lambda, config.min_split_gain, config.min_child_weight
    best = None
    gr, hr = g[rows], h[rows]
    for j in range(X.shape[1]):
        col = X[rows, j]
        missing = np.isnan(col)
        present = ~missing
        vals = col[present]
        if vals.size < 2:
            continue
        order = np.argsort(vals, kind="stable")
        vals = vals[order]
        distinct = vals[1:] > vals[:-1]
        if not distinct.any():
            continue
        # missing values always travel with the left child
        GL = np.cumsum(gr[present][order])[:-1][distinct] + gr[missing].sum()
        HL = np.cumsum(hr[present][order])[:-1][distinct] + hr[missing].sum()
        GR = G - GL
        HR = H - HL
        gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - G * G / (H + lam)) - gamma
        ok = (gain > 0) & (HL >= mcw) & (HR >= mcw)
        if not ok.any():
            continue
        gain = np.where(ok, gain, -np.inf)
        k = int(np.argmax(gain))  # first maximum: lowest threshold wins ties
        if best is None or gain[k] > best[0]:
            lo, hi = vals[:-1][distinct][k], vals[1:][distinct][k]
            thr = lo + (hi - lo) / 2.0
            if not lo < thr <= hi:
                thr = hi
            best = (float(gain[k]), j, float(thr))
    return best


def grow_tree(gradients, hessians, data, config: TrainConfig, *,
              tree_id: int = 0, iteration_tag: int = 0) -> DecisionTree:
    """Exact-greedy regression tree fit to one Newton step of the loss.

    Candidate thresholds are midpoints between consecutive distinct values of
    each feature. Equal gains resolve to the lower feature index, then the
    lower threshold.
    """
    X = _matrix(data)
    g = np.asarray(gradients, dtype=np.float64)
    h = np.asarray(hessians, dtype=np.float64)
    if not (g.shape[0] == h.shape[0] == X.shape[0]):
        raise ValueError(
            f"length mismatch: {g.shape[0]} gradients, {h.shape[0]} hessians, {X.shape[0]} samples")

    nodes: list[TreeNode | None] = []

    def build(rows: np.ndarray, depth: int) -> int:
        node_id = len(nodes)
        nodes.append(None)
        G = g[rows].sum()
        H = h[rows].sum()
        split = _best_split(X, g, h, rows, G, H, config) if depth < config.max_depth else None
        if split is None:
            nodes[node_id] = TreeNode.leaf(node_id, leaf_weight(G, H, config))
            return node_id
        _, feature, threshold = split
        goes_right = X[rows, feature] >= threshold
        left = build(rows[~goes_right], depth + 1)
        right = build(rows[goes_right], depth + 1)
        nodes[node_id] = TreeNode.split(node_id, feature, threshold, left, right)
        return node_id

    build(np.arange(X.shape[0]), 0)
    return DecisionTree(tree_id, tuple(nodes), iteration_tag)


def train_local(warm_start: Ensemble, data, config: TrainConfig) -> list[DecisionTree]:
    """Boost ``config.n_estimators`` new trees on top of ``warm_start``.

    Each tree fits the residual of the warm start plus the trees before it.
    Returned trees carry client-local ids 0..n-1 and iteration tags that
    continue from the warm start.
    """
    X = _matrix(data)
    y = np.asarray(data.targets, dtype=np.float64)
    if X.shape[0] == 0:
        raise DatasetEmptyError("cannot train on an empty dataset")
    names = tuple(getattr(data, "feature_names", ()))
    if warm_start.feature_names and names and names != warm_start.feature_names:
        raise ValueError(f"feature mismatch: model has {warm_start.feature_names}, data has {names}")

    pred = predict_batch(warm_start, X)
    hess = np.ones_like(y)
    first_tag = warm_start.next_iteration_tag
    trees = []
    for i in range(config.n_estimators):
        tree = grow_tree(pred - y, hess, X, config, tree_id=i, iteration_tag=first_tag + i)
        pred += tree.predict(X)
        trees.append(tree)
    return trees


def fit(data, config: TrainConfig, base_score: float = 0.0) -> Ensemble:
    """Train an ensemble from scratch as a single aggregation round."""
    empty = Ensemble(base_score, feature_names=tuple(data.feature_names))
    return empty.append_round(train_local(empty, data, config))
