"""Recurrent classification models: cells, network, training, checkpoints."""

from .cells import (
    CellParams,
    ShapeMismatch,
    gru_cell_step,
    gru_step,
    gru_step_backward,
    lstm_cell_step,
    lstm_step,
    lstm_step_backward,
    sigmoid,
)
from .checkpoint import (
    CorruptChecksum,
    FormatVersionMismatch,
    load_checkpoint,
    load_checkpoint_with_extra,
    save_checkpoint,
)
from .network import (
    BRANCH_TYPES,
    ModelConfig,
    NetworkParams,
    Prediction,
    backward_batch,
    forward,
    forward_batch,
    init_params,
    predict,
)
from .training import (
    Adam,
    EmptySplit,
    EpochStats,
    NonFiniteLoss,
    TrainConfig,
    bce_from_logits,
    default_batch_size,
    train,
)

__all__ = [
    "Adam",
    "BRANCH_TYPES",
    "CellParams",
    "CorruptChecksum",
    "EmptySplit",
    "EpochStats",
    "FormatVersionMismatch",
    "ModelConfig",
    "NetworkParams",
    "NonFiniteLoss",
    "Prediction",
    "ShapeMismatch",
    "TrainConfig",
    "backward_batch",
    "bce_from_logits",
    "default_batch_size",
    "forward",
    "forward_batch",
    "gru_cell_step",
    "gru_step",
    "gru_step_backward",
    "init_params",
    "load_checkpoint",
    "load_checkpoint_with_extra",
    "lstm_cell_step",
    "lstm_step",
    "lstm_step_backward",
    "predict",
    "save_checkpoint",
    "sigmoid",
    "train",
]
