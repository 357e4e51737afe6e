"""Interpolated nearest-neighbour estimators and their asymptotic theory."""

from .core import LabeledDataset, RngSeed, Task, split_train_test, validate_dataset
from .estimator import (
    EvalContext,
    EvalReport,
    FittedModel,
    eval_cis,
    eval_mse,
    eval_regret,
    fit,
    optimize_k,
    predict_class,
    predict_regression,
)
from .neighbors import NeighborIndex, NeighborList, brute_knn, build_index, knn_query
from .weighting import WeightScheme, compute_weights

__version__ = "0.1.0"

__all__ = [
    "EvalContext", "EvalReport", "FittedModel", "LabeledDataset", "NeighborIndex",
    "NeighborList", "RngSeed", "Task", "WeightScheme", "brute_knn", "build_index",
    "compute_weights", "eval_cis", "eval_mse", "eval_regret", "fit", "knn_query",
    "optimize_k", "predict_class", "predict_regression", "split_train_test",
    "validate_dataset",
]
