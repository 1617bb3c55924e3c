"""Dense autodiff, graph batching and the four node classifiers."""

from .autodiff import Tensor
from .batching import GraphBatch, batch_windows, chunk_batches, normalized_adjacency
from .checkpoint import load_checkpoint, save_checkpoint
from .models import MODEL_KINDS, Hyperparams, ModelParams, forward, init_params
from .train import (
    Adam,
    TrainReport,
    class_weights_from_labels,
    grad_check,
    train,
    weighted_loss,
)

__all__ = [
    "Adam",
    "GraphBatch",
    "Hyperparams",
    "MODEL_KINDS",
    "ModelParams",
    "Tensor",
    "TrainReport",
    "batch_windows",
    "chunk_batches",
    "class_weights_from_labels",
    "forward",
    "grad_check",
    "init_params",
    "load_checkpoint",
    "normalized_adjacency",
    "save_checkpoint",
    "train",
    "weighted_loss",
]
