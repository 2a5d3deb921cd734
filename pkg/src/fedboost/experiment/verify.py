"""Invariant checks on a serialized model file."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..gbt import Ensemble, ModelFormatError, deserialize, predict_batch, serialize
from ..gbt.tree import LEAF


def _route_sum(model: Ensemble, x) -> float:
    total = model.base_score
    for tree in model.trees:
        node = tree.nodes[0]
        while node.kind != LEAF:
            v = x[node.split_feature]
            go_left = np.isnan(v) or v < node.threshold
            node = tree.nodes[node.left_child if go_left else node.right_child]
        total += node.leaf_weight
    return total


def verify_model(path, n_inputs: int = 64, seed: int = 0) -> list[tuple[str, bool, str]]:
    """Run every check; returns (name, passed, detail) triples."""
    raw = Path(path).read_bytes()
    results = []
    try:
        model = deserialize(raw)
    except ModelFormatError as exc:
        return [("decode", False, f"{type(exc).__name__}: {exc}")]
    results.append(("decode", True, f"{model.n_trees} trees"))

    ids = [t.tree_id for t in model.trees]
    results.append(("tree_ids_gap_free", ids == list(range(len(ids))), f"T={len(ids)}"))

    b = list(model.iteration_boundaries)
    ok = (not b) or (b[0] == 0 and all(x < y for x, y in zip(b, b[1:])))
    results.append(("iteration_boundaries", ok, str(b[:8]) + ("..." if len(b) > 8 else "")))

    width = max((n.split_feature for t in model.trees for n in t.nodes if n.kind != LEAF), default=-1)
    ok = not model.feature_names or width < len(model.feature_names)
    results.append(("split_features_in_range", ok, f"max feature index {width}"))

    results.append(("reserialize_identical", serialize(model) == raw, f"{len(raw)} bytes"))

    d = max(len(model.feature_names), width + 1, 1)
    X = np.random.default_rng(seed).normal(0.0, 100.0, size=(n_inputs, d))
    X[::7, 0] = np.nan
    fast = predict_batch(model, X)
    slow = np.array([_route_sum(model, x) for x in X])
    results.append(("predict_matches_oracle", bool(np.array_equal(fast, slow)), f"{n_inputs} random inputs"))
    return results
