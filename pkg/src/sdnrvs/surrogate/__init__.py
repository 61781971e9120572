"""Learned predictor of the voltage-stability index.

A network state is encoded as a fixed ``(E, 8)`` array and mapped to a
scalar by a small numpy network (1-D convolutions or an MLP).
"""

from .dataset import LabeledDataset, generate_dataset, load_dataset, save_dataset, split_groups
from .encoding import COLUMNS, N_FEATURES, closed_rows, encode
from .metrics import consistency
from .nn import (Hyperparams, PredictorModel, load_model, predict, predict_batch, save_model,
                 train)

__all__ = [
    "COLUMNS", "N_FEATURES", "Hyperparams", "LabeledDataset", "PredictorModel",
    "closed_rows", "consistency", "encode", "generate_dataset", "load_dataset",
    "load_model", "predict", "predict_batch", "save_dataset", "save_model",
    "split_groups", "train",
]
