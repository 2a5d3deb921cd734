"""Regression tree and ensemble types, plus additive inference."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

SPLIT = "split"
LEAF = "leaf"


class TreeStructureError(ValueError):
    """A tree or ensemble violates its structural invariants."""


@dataclass(frozen=True)
class TreeNode:
    node_id: int
    kind: str
    split_feature: int | None = None
    threshold: float | None = None
    left_child: int | None = None
    right_child: int | None = None
    leaf_weight: float | None = None

    @classmethod
    def split(cls, node_id: int, feature: int, threshold: float, left: int, right: int) -> "TreeNode":
        return cls(node_id, SPLIT, split_feature=int(feature), threshold=float(threshold),
                   left_child=int(left), right_child=int(right))

    @classmethod
    def leaf(cls, node_id: int, weight: float) -> "TreeNode":
        return cls(node_id, LEAF, leaf_weight=float(weight))

    @property
    def is_leaf(self) -> bool:
        return self.kind == LEAF


def _check_structure(nodes: Sequence[TreeNode]) -> None:
    if not nodes:
        raise TreeStructureError("tree has no nodes")
    n = len(nodes)
    parents = [0] * n
    for pos, node in enumerate(nodes):
        if node.node_id != pos:
            raise TreeStructureError(f"node at position {pos} has node_id {node.node_id}")
        if node.kind == SPLIT:
            for child in (node.left_child, node.right_child):
                if child is None or not 0 <= child < n:
                    raise TreeStructureError(f"node {pos} has dangling child {child}")
                parents[child] += 1
            if node.split_feature is None or node.split_feature < 0 or node.threshold is None:
                raise TreeStructureError(f"split node {pos} lacks feature or threshold")
        elif node.kind == LEAF:
            if node.leaf_weight is None:
                raise TreeStructureError(f"leaf node {pos} has no weight")
        else:
            raise TreeStructureError(f"node {pos} has unknown kind {node.kind!r}")
    if parents[0] != 0:
        raise TreeStructureError("root node has a parent")
    for pos in range(1, n):
        if parents[pos] != 1:
            raise TreeStructureError(f"node {pos} has {parents[pos]} parents")
    # one parent per non-root node plus n-1 edges still allows a detached cycle
    seen = {0}
    stack = [0]
    while stack:
        node = nodes[stack.pop()]
        if node.kind == SPLIT:
            for child in (node.left_child, node.right_child):
                if child not in seen:
                    seen.add(child)
                    stack.append(child)
    if len(seen) != n:
        raise TreeStructureError("tree contains nodes unreachable from the root")


@dataclass(frozen=True)
class DecisionTree:
    """Binary regression tree; node 0 is the root.

    Routing sends a sample left iff its feature value is below the threshold;
    missing values (NaN) go left.
    """

    tree_id: int
    nodes: tuple[TreeNode, ...]
    iteration_tag: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if self.tree_id < 0:
            raise TreeStructureError(f"negative tree_id {self.tree_id}")
        _check_structure(self.nodes)

    @property
    def n_leaves(self) -> int:
        return sum(node.is_leaf for node in self.nodes)

    @property
    def depth(self) -> int:
        depth = {0: 0}
        for node in self.nodes:
            if node.kind == SPLIT:
                depth[node.left_child] = depth[node.right_child] = depth[node.node_id] + 1
        return max(depth.values())

    @cached_property
    def _arrays(self):
        feature = np.array([n.split_feature if n.kind == SPLIT else -1 for n in self.nodes], dtype=np.intp)
        threshold = np.array([n.threshold if n.kind == SPLIT else 0.0 for n in self.nodes], dtype=np.float64)
        left = np.array([n.left_child if n.kind == SPLIT else -1 for n in self.nodes], dtype=np.intp)
        right = np.array([n.right_child if n.kind == SPLIT else -1 for n in self.nodes], dtype=np.intp)
        value = np.array([n.leaf_weight if n.kind == LEAF else 0.0 for n in self.nodes], dtype=np.float64)
        return feature, threshold, left, right, value, feature < 0

    def leaf_index(self, X: np.ndarray) -> np.ndarray:
        """Index of the leaf each row of ``X`` lands in."""
        X = np.asarray(X, dtype=np.float64)
        feature, threshold, left, right, _, is_leaf = self._arrays
        idx = np.zeros(X.shape[0], dtype=np.intp)
        active = np.flatnonzero(~is_leaf[idx])
        while active.size:
            cur = idx[active]
            x = X[active, feature[cur]]
            # NaN >= t is False, so missing values fall through to the left child
            idx[active] = np.where(x >= threshold[cur], right[cur], left[cur])
            active = active[~is_leaf[idx[active]]]
        return idx

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self._arrays[4][self.leaf_index(X)]

    def route(self, x: Sequence[float]) -> TreeNode:
        node = self.nodes[0]
        while node.kind == SPLIT:
            value = x[node.split_feature]
            node = self.nodes[node.right_child if value >= node.threshold else node.left_child]
        return node

    def with_id(self, tree_id: int) -> "DecisionTree":
        return DecisionTree(tree_id, self.nodes, self.iteration_tag)


@dataclass(frozen=True)
class Ensemble:
    """Additive tree ensemble: ``base_score`` plus the sum of every tree's leaf.

    ``iteration_boundaries`` holds the index of the first tree contributed by
    each aggregation round.
    """

    base_score: float = 0.0
    trees: tuple[DecisionTree, ...] = ()
    iteration_boundaries: tuple[int, ...] = ()
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "base_score", float(self.base_score))
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "iteration_boundaries", tuple(int(b) for b in self.iteration_boundaries))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        for pos, tree in enumerate(self.trees):
            if tree.tree_id != pos:
                raise TreeStructureError(f"tree at position {pos} has tree_id {tree.tree_id}")
        bounds = self.iteration_boundaries
        if bounds:
            if bounds[0] != 0:
                raise TreeStructureError("iteration_boundaries must start at 0")
            if any(b >= a for b, a in zip(bounds, bounds[1:])) or bounds[-1] >= max(len(self.trees), 1):
                raise TreeStructureError(f"bad iteration_boundaries {bounds}")

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def next_iteration_tag(self) -> int:
        return max((t.iteration_tag for t in self.trees), default=-1) + 1

    def append_round(self, trees: Iterable[DecisionTree]) -> "Ensemble":
        """Renumber ``trees`` after the current ones and mark where they start."""
        start = len(self.trees)
        new = tuple(t.with_id(start + i) for i, t in enumerate(trees))
        if not new:
            raise TreeStructureError("cannot append an empty round")
        return Ensemble(self.base_score, self.trees + new,
                        self.iteration_boundaries + (start,), self.feature_names)

    def truncated(self, n_trees: int) -> "Ensemble":
        """The first ``n_trees`` trees, keeping the boundaries that still apply."""
        return Ensemble(self.base_score, self.trees[:n_trees],
                        tuple(b for b in self.iteration_boundaries if b < n_trees),
                        self.feature_names)


def predict(ensemble: Ensemble, features: Sequence[float]) -> float:
    """Predicted power for a single feature vector."""
    if ensemble.feature_names and len(features) != len(ensemble.feature_names):
        raise ValueError(f"expected {len(ensemble.feature_names)} features, got {len(features)}")
    x = np.asarray(features, dtype=np.float64)
    return float(predict_batch(ensemble, x[None, :])[0])


def predict_batch(ensemble: Ensemble, X) -> np.ndarray:
    """Predictions for every row of ``X``; trees are summed in ensemble order."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be two-dimensional")
    if ensemble.feature_names and X.shape[1] != len(ensemble.feature_names):
        raise ValueError(f"expected {len(ensemble.feature_names)} features, got {X.shape[1]}")
    out = np.full(X.shape[0], ensemble.base_score)
    for tree in ensemble.trees:
        out += tree.predict(X)
    return out
