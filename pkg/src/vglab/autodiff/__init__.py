"""Reverse-mode autodiff on dense numpy tensors."""

from .tensor import (
    Tensor,
    Tape,
    active_tape,
    add,
    as_tensor,
    backward,
    clamp,
    concat,
    cumprod,
    default_dtype,
    div,
    dtype_scope,
    exp,
    leaky_relu,
    log,
    matmul,
    mean,
    mul,
    narrow,
    neg,
    no_grad,
    pad,
    prod_lanes,
    relu,
    reshape,
    set_default_dtype,
    sigmoid,
    square,
    sub,
    sum,
    tanh,
)
from .ops import (
    conv2d,
    conv3d,
    grid_resample_trilinear,
    nearest_upsample,
    transposed_conv2d,
    transposed_conv3d,
    weighted_gather,
)
from .optim import Adam, adam_step
from .gradcheck import check_gradients, finite_difference_grad
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Tensor", "Tape", "active_tape", "backward", "no_grad", "dtype_scope",
    "set_default_dtype", "default_dtype", "as_tensor",
    "add", "sub", "mul", "div", "neg", "matmul", "relu", "leaky_relu",
    "sigmoid", "tanh", "exp", "log", "square", "clamp", "mean", "sum",
    "reshape", "concat", "narrow", "pad", "cumprod", "prod_lanes",
    "conv2d", "conv3d", "transposed_conv2d", "transposed_conv3d",
    "nearest_upsample", "grid_resample_trilinear", "weighted_gather",
    "Adam", "adam_step", "check_gradients", "finite_difference_grad",
    "save_checkpoint", "load_checkpoint",
]
