from .codec import (
    DanglingChildError,
    DuplicateTreeIdError,
    MalformedModelError,
    ModelFormatError,
    SchemaVersionError,
    deserialize,
    serialize,
)
from .grow import ConfigError, DatasetEmptyError, TrainConfig, fit, grow_tree, leaf_weight, train_local
from .tree import DecisionTree, Ensemble, TreeNode, TreeStructureError, predict, predict_batch

__all__ = [
    "ConfigError",
    "DanglingChildError",
    "DatasetEmptyError",
    "DecisionTree",
    "DuplicateTreeIdError",
    "Ensemble",
    "MalformedModelError",
    "ModelFormatError",
    "SchemaVersionError",
    "TrainConfig",
    "TreeNode",
    "TreeStructureError",
    "deserialize",
    "fit",
    "grow_tree",
    "leaf_weight",
    "predict",
    "predict_batch",
    "serialize",
    "train_local",
]
