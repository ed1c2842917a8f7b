from .model import (
    Architecture,
    CellKind,
    ModelConfig,
    ModelParams,
    Prediction,
    forward,
    forward_batch,
    init_params,
    loss,
    predict,
)
from .training import TrainConfig, TrainResult, grad_check, grad_check_all, train_arrays

__all__ = [
    "Architecture",
    "CellKind",
    "ModelConfig",
    "ModelParams",
    "Prediction",
    "TrainConfig",
    "TrainResult",
    "forward",
    "forward_batch",
    "grad_check",
    "grad_check_all",
    "init_params",
    "loss",
    "predict",
    "train_arrays",
]
