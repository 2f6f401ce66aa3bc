"""Desk-scale remove-and-retrain (and keep-and-retrain) benchmark for
feature-importance estimators."""

from .nn import (ArrayDataset, Model, TrainConfig, fit_least_squares,
                 forward, input_gradient, train)
from .estimators import (EnsembleConfig, IGConfig, ImportanceEstimate,
                         control_random, control_sobel, ensemble,
                         estimate_gb, estimate_grad, estimate_ig,
                         square_estimate)
from .pipeline import (ModificationSpec, ModifiedDataset, ResultGrid,
                       generate_modified_datasets, modify_sample,
                       rank_features, run_deletion_metric, run_roar)
from .toydata import ToyConfig, ToyDataset, generate_toy, ground_truth_ranking

__all__ = [
    "ArrayDataset", "Model", "TrainConfig", "fit_least_squares", "forward",
    "input_gradient", "train", "EnsembleConfig", "IGConfig",
    "ImportanceEstimate", "control_random", "control_sobel", "ensemble",
    "estimate_gb", "estimate_grad", "estimate_ig", "square_estimate",
    "ModificationSpec", "ModifiedDataset", "ResultGrid",
    "generate_modified_datasets", "modify_sample", "rank_features",
    "run_deletion_metric", "run_roar", "ToyConfig", "ToyDataset",
    "generate_toy", "ground_truth_ranking",
]
