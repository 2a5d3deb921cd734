import json

import numpy as np
import pytest

from fedboost.gbt import (
    DanglingChildError,
    DecisionTree,
    DuplicateTreeIdError,
    Ensemble,
    MalformedModelError,
    ModelFormatError,
    SchemaVersionError,
    TreeNode,
    deserialize,
    predict,
    predict_batch,
    serialize,
)
from oracles import random_tree


def stump_model():
    nodes = (TreeNode.split(0, 0, 5.0, 1, 2), TreeNode.leaf(1, -1.0), TreeNode.leaf(2, 2.0))
    return Ensemble(10.0, (DecisionTree(0, nodes),), (0,), ("f0",))


def random_model(n_trees, seed=0, n_features=5):
    rng = np.random.default_rng(seed)
    trees = tuple(random_tree(rng, n_features, max_depth=5, tree_id=i, iteration_tag=i // 7)
                  for i in range(n_trees))
    bounds = tuple(range(0, n_trees, 50)) if n_trees else ()
    return Ensemble(float(rng.normal()), trees, bounds, tuple(f"c{j}" for j in range(n_features)))


def test_empty_round_trip():
    assert deserialize(serialize(Ensemble())) == Ensemble()


def test_stump_round_trip_predicts():
    model = deserialize(serialize(stump_model()))
    assert model == stump_model()
    assert predict(model, [3.0]) == 9.0


def test_document_layout():
    doc = json.loads(serialize(stump_model()))
    assert list(doc) == ["schema_version", "base_score", "feature_names", "iteration_boundaries", "trees"]
    assert doc["schema_version"] == 1
    assert doc["base_score"] == "10.0"
    assert doc["trees"][0]["nodes"][0] == {"kind": "split", "split_feature": 0, "threshold": "5.0",
                                           "left_child": 1, "right_child": 2}
    assert doc["trees"][0]["nodes"][1] == {"kind": "leaf", "leaf_weight": "-1.0"}


def test_reals_survive_bit_exact():
    awkward = [0.1, 1 / 3, 2.0 ** -1074, 1.7976931348623157e308, -0.0, 1e-300, 123456789.123456789]
    nodes = (TreeNode.split(0, 0, awkward[1], 1, 2), TreeNode.leaf(1, awkward[2]), TreeNode.leaf(2, awkward[3]))
    model = Ensemble(awkward[0], (DecisionTree(0, nodes),), (0,))
    back = deserialize(serialize(model))
    assert back.base_score.hex() == model.base_score.hex()
    assert [n.leaf_weight for n in back.trees[0].nodes[1:]] == awkward[2:4]
    assert back.trees[0].nodes[0].threshold.hex() == awkward[1].hex()


def test_500_random_trees_reserialize_byte_identical():
    model = random_model(500)
    blob = serialize(model)
    again = deserialize(blob)
    assert again == model
    assert serialize(again) == blob
    X = np.random.default_rng(1).normal(scale=2.0, size=(200, 5))
    np.testing.assert_array_equal(predict_batch(again, X), predict_batch(model, X))


def _doc():
    return json.loads(serialize(random_model(3, seed=4)))


def _bytes(doc):
    return json.dumps(doc).encode()


def test_malformed_json():
    with pytest.raises(MalformedModelError):
        deserialize(b"{not json")


def test_unknown_schema_version():
    doc = _doc()
    doc["schema_version"] = 2
    with pytest.raises(SchemaVersionError):
        deserialize(_bytes(doc))


def test_duplicate_tree_id():
    doc = _doc()
    doc["trees"][1]["tree_id"] = 0
    with pytest.raises(DuplicateTreeIdError):
        deserialize(_bytes(doc))


def test_dangling_child():
    doc = _doc()
    split = next(n for n in doc["trees"][0]["nodes"] if n["kind"] == "split")
    split["right_child"] = 999
    with pytest.raises(DanglingChildError):
        deserialize(_bytes(doc))


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("trees"),
    lambda d: d.update(extra=1),
    lambda d: d.update(base_score=1.5),
    lambda d: d.update(base_score="nan"),
    lambda d: d["trees"][0]["nodes"][0].update(kind="branch"),
    lambda d: d["trees"][0].update(tree_id=-1),
    lambda d: d["trees"][0].update(nodes=[]),
    lambda d: d.update(iteration_boundaries=[0, 0]),
    lambda d: d["trees"][0]["nodes"].append({"kind": "leaf", "leaf_weight": "0.0"}),
    lambda d: d["trees"][2].update(tree_id=5),
])
def test_other_malformations_are_parse_errors(mutate):
    doc = _doc()
    mutate(doc)
    with pytest.raises(ModelFormatError):
        deserialize(_bytes(doc))


def test_error_classes_are_distinct():
    classes = {MalformedModelError, SchemaVersionError, DuplicateTreeIdError, DanglingChildError}
    assert len(classes) == 4
    for a in classes:
        for b in classes - {a}:
            assert not issubclass(a, b)
