"""Reverse-mode autodiff engine, Adam optimizer, gradient checking and checkpoints."""

from .checkpoint import load_checkpoint, save_checkpoint
from .functional import (
    clamp,
    elementwise,
    exp,
    gelu,
    layernorm,
    linalg,
    linear,
    log,
    maximum,
    minimum,
    outer,
    sigmoid,
    softplus,
    square,
    tanh,
)
from .gradcheck import gradient_check
from .optim import AdamState, adam_step, clip_grad_norm, zero_grad
from .tensor import (
    Tensor,
    add,
    as_tensor,
    backward,
    concat,
    custom_op,
    div,
    matmul,
    mul,
    neg,
    no_grad,
    reshape,
    stack,
    sub,
    tmean,
    tsum,
)

__all__ = [
    "AdamState",
    "Tensor",
    "adam_step",
    "add",
    "as_tensor",
    "backward",
    "clamp",
    "clip_grad_norm",
    "concat",
    "custom_op",
    "div",
    "elementwise",
    "exp",
    "gelu",
    "gradient_check",
    "layernorm",
    "linalg",
    "linear",
    "load_checkpoint",
    "log",
    "matmul",
    "maximum",
    "minimum",
    "mul",
    "neg",
    "no_grad",
    "outer",
    "reshape",
    "save_checkpoint",
    "sigmoid",
    "softplus",
    "square",
    "stack",
    "sub",
    "tanh",
    "tmean",
    "tsum",
    "zero_grad",
]
