from .tensor import (Tape, Tensor, active_tape, add, as_tensor, clip, concat,
                     exp, layer_norm, log, masked_softmax, matmul, mean,
                     minimum, mul, relu, reshape, square, sub, sum_, swapaxes,
                     take)
from .nn import Mlp, ParameterStore, affine, attention
from . import checkpoint

__all__ = [
    "Tape", "Tensor", "active_tape", "add", "as_tensor", "clip", "concat",
    "exp", "layer_norm", "log", "masked_softmax", "matmul", "mean", "minimum",
    "mul", "relu", "reshape", "square", "sub", "sum_", "swapaxes", "take",
    "Mlp", "ParameterStore", "affine", "attention", "checkpoint",
]
