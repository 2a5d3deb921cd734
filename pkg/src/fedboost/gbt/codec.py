"""JSON codec for ensembles.

Document layout (``schema_version`` 1)::

    {"schema_version": 1,
     "base_score": "<real>",
     "feature_names": ["cpu_util", ...],
     "iteration_boundaries": [0, 300, ...],
     "trees": [{"tree_id": 0, "iteration_tag": 0,
                "nodes": [{"kind": "split", "split_feature": 0, "threshold": "<real>",
                           "left_child": 1, "right_child": 2},
                          {"kind": "leaf", "leaf_weight": "<real>"}, ...]}, ...]}

A node's id is its position in ``nodes``; the root is node 0. Reals are
written as the shortest decimal string that reads back to the same double,
so a round trip is bit-exact.
"""

from __future__ import annotations

import json
import math

from .tree import LEAF, SPLIT, DecisionTree, Ensemble, TreeNode, TreeStructureError

SCHEMA_VERSION = 1

# field name -> wire type; also consumed by the wire-message privacy checks
ENSEMBLE_FIELDS = {
    "schema_version": "int",
    "base_score": "real",
    "feature_names": "list[str]",
    "iteration_boundaries": "list[int]",
    "trees": "list[tree]",
}
TREE_FIELDS = {"tree_id": "int", "iteration_tag": "int", "nodes": "list[node]"}
SPLIT_FIELDS = {"kind": "str", "split_feature": "int", "threshold": "real",
                "left_child": "int", "right_child": "int"}
LEAF_FIELDS = {"kind": "str", "leaf_weight": "real"}


class ModelFormatError(ValueError):
    """Base class for ensemble documents that cannot be decoded."""


class MalformedModelError(ModelFormatError):
    pass


class SchemaVersionError(ModelFormatError):
    pass


class DuplicateTreeIdError(ModelFormatError):
    pass


class DanglingChildError(ModelFormatError):
    pass


def encode_real(x: float) -> str:
    return repr(float(x))


def decode_real(s, where: str) -> float:
    if not isinstance(s, str):
        raise MalformedModelError(f"{where}: expected a decimal string, got {type(s).__name__}")
    try:
        x = float(s)
    except ValueError:
        raise MalformedModelError(f"{where}: {s!r} is not a real number") from None
    if not math.isfinite(x):
        raise MalformedModelError(f"{where}: non-finite value {s!r}")
    return x


def node_to_doc(node: TreeNode) -> dict:
    if node.kind == SPLIT:
        return {"kind": SPLIT, "split_feature": node.split_feature,
                "threshold": encode_real(node.threshold),
                "left_child": node.left_child, "right_child": node.right_child}
    return {"kind": LEAF, "leaf_weight": encode_real(node.leaf_weight)}


def tree_to_doc(tree: DecisionTree) -> dict:
    return {"tree_id": tree.tree_id, "iteration_tag": tree.iteration_tag,
            "nodes": [node_to_doc(n) for n in tree.nodes]}


def ensemble_to_doc(ensemble: Ensemble) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "base_score": encode_real(ensemble.base_score),
        "feature_names": list(ensemble.feature_names),
        "iteration_boundaries": list(ensemble.iteration_boundaries),
        "trees": [tree_to_doc(t) for t in ensemble.trees],
    }


def dumps(doc) -> bytes:
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=True, allow_nan=False).encode("ascii")


def serialize(ensemble: Ensemble) -> bytes:
    return dumps(ensemble_to_doc(ensemble))


def _expect_keys(obj, fields: dict, where: str) -> None:
    if not isinstance(obj, dict):
        raise MalformedModelError(f"{where}: expected an object")
    keys = set(obj)
    if keys != set(fields):
        missing = sorted(set(fields) - keys)
        extra = sorted(keys - set(fields))
        raise MalformedModelError(f"{where}: missing fields {missing}, unexpected fields {extra}")


def _int(value, where: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise MalformedModelError(f"{where}: expected an integer >= {minimum}, got {value!r}")
    return value


def node_from_doc(doc, pos: int, n_nodes: int, where: str) -> TreeNode:
    kind = doc.get("kind") if isinstance(doc, dict) else None
    where = f"{where}.nodes[{pos}]"
    if kind == SPLIT:
        _expect_keys(doc, SPLIT_FIELDS, where)
        left = _int(doc["left_child"], where + ".left_child", minimum=-(2**63))
        right = _int(doc["right_child"], where + ".right_child", minimum=-(2**63))
        for child in (left, right):
            if not 0 <= child < n_nodes:
                raise DanglingChildError(f"{where}: child index {child} outside 0..{n_nodes - 1}")
        return TreeNode.split(pos, _int(doc["split_feature"], where + ".split_feature"),
                              decode_real(doc["threshold"], where + ".threshold"), left, right)
    if kind == LEAF:
        _expect_keys(doc, LEAF_FIELDS, where)
        return TreeNode.leaf(pos, decode_real(doc["leaf_weight"], where + ".leaf_weight"))
    raise MalformedModelError(f"{where}: unknown node kind {kind!r}")


def tree_from_doc(doc, where: str = "tree") -> DecisionTree:
    _expect_keys(doc, TREE_FIELDS, where)
    nodes_doc = doc["nodes"]
    if not isinstance(nodes_doc, list) or not nodes_doc:
        raise MalformedModelError(f"{where}.nodes: expected a non-empty array")
    nodes = tuple(node_from_doc(nd, i, len(nodes_doc), where) for i, nd in enumerate(nodes_doc))
    try:
        return DecisionTree(_int(doc["tree_id"], where + ".tree_id"), nodes,
                            _int(doc["iteration_tag"], where + ".iteration_tag"))
    except TreeStructureError as exc:
        raise MalformedModelError(f"{where}: {exc}") from None


def ensemble_from_doc(doc) -> Ensemble:
    if not isinstance(doc, dict):
        raise MalformedModelError("model document must be a JSON object")
    if "schema_version" in doc and doc["schema_version"] != SCHEMA_VERSION:
        raise SchemaVersionError(f"unsupported schema_version {doc['schema_version']!r}")
    _expect_keys(doc, ENSEMBLE_FIELDS, "model")
    names = doc["feature_names"]
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise MalformedModelError("feature_names must be an array of strings")
    bounds = doc["iteration_boundaries"]
    if not isinstance(bounds, list):
        raise MalformedModelError("iteration_boundaries must be an array")
    bounds = [_int(b, "iteration_boundaries") for b in bounds]
    trees_doc = doc["trees"]
    if not isinstance(trees_doc, list):
        raise MalformedModelError("trees must be an array")
    trees = [tree_from_doc(td, f"trees[{i}]") for i, td in enumerate(trees_doc)]
    seen = set()
    for tree in trees:
        if tree.tree_id in seen:
            raise DuplicateTreeIdError(f"tree_id {tree.tree_id} appears more than once")
        seen.add(tree.tree_id)
    try:
        return Ensemble(decode_real(doc["base_score"], "base_score"), tuple(trees), tuple(bounds), tuple(names))
    except TreeStructureError as exc:
        raise MalformedModelError(str(exc)) from None


def deserialize(data: bytes | str) -> Ensemble:
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedModelError(f"not a JSON document: {exc}") from None
    return ensemble_from_doc(doc)
