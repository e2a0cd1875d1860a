"""Differentiable tensor engine: ops, autodiff, Adam, checkpoints."""

from .kernels import BACKEND
from .optim import ParamStore, adam_step
from .serialize import load_params, save_params
from .tensor import (
    OPS,
    Tensor,
    add,
    apply_op,
    backward,
    conv2d,
    layer_scale_shift,
    matmul,
    mse,
    mul,
    nearest_upsample,
    silu,
)

__all__ = [
    "BACKEND",
    "OPS",
    "ParamStore",
    "Tensor",
    "adam_step",
    "add",
    "apply_op",
    "backward",
    "conv2d",
    "layer_scale_shift",
    "load_params",
    "matmul",
    "mse",
    "mul",
    "nearest_upsample",
    "save_params",
    "silu",
]
