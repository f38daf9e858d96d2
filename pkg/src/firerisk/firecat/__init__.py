from .baseline import BaselineModel, fit_baseline
from .boosting import (BoostModel, BoostParams, Feature, as_manifest, fit_firecat, grid_search,
                       log_loss, softmax)
from .encoding import EncodingTable, encode_categorical
from .split import split_indices, split_train_test
from .tree import Tree

__all__ = [
    "BaselineModel", "BoostModel", "BoostParams", "EncodingTable", "Feature", "Tree",
    "as_manifest", "encode_categorical", "fit_baseline", "fit_firecat", "grid_search",
    "log_loss", "softmax", "split_indices", "split_train_test",
]
