from .tensor import Tensor, OpShapeError, no_grad, constant
from . import ops
from .check import grad_check
from .optim import AdamW, OptimConfig, TrainingDiverged, lr_at_step
from .checkpoint import save_checkpoint, load_checkpoint, CheckpointError

__all__ = [
    "Tensor", "OpShapeError", "no_grad", "constant", "ops", "grad_check",
    "AdamW", "OptimConfig", "TrainingDiverged", "lr_at_step",
    "save_checkpoint", "load_checkpoint", "CheckpointError",
]
