"""Minimal differentiable compute core backing both networks."""

from .gradcheck import grad_check
from .optim import SGD, Adam, make_optimizer, optimizer_step
from .ops import (
    activation,
    add,
    concat_channels,
    conv2d,
    cross_entropy,
    gather_pixels,
    global_avg_pool,
    linear,
    mse,
    pool_max,
    relu,
    sigmoid,
    softmax,
    upsample2x,
    weighted_sq_err_sum,
)
from .serialize import dump_bytes, load_bytes, load_tensors, save_tensors
from .tensor import (
    DimensionError,
    active_tape,
    MissingGradientError,
    NonFiniteError,
    Parameter,
    Tape,
    Tensor,
    default_dtype,
    no_tape,
    set_default_dtype,
    tensor,
    use_dtype,
)

__all__ = [
    "SGD", "Adam", "make_optimizer", "optimizer_step", "grad_check",
    "activation", "add", "concat_channels", "conv2d", "cross_entropy",
    "gather_pixels", "global_avg_pool", "linear", "mse", "pool_max", "relu",
    "sigmoid", "softmax", "upsample2x", "weighted_sq_err_sum",
    "dump_bytes", "load_bytes", "load_tensors", "save_tensors",
    "DimensionError", "MissingGradientError", "NonFiniteError", "Parameter",
    "Tape", "Tensor", "active_tape", "default_dtype", "no_tape", "set_default_dtype",
    "tensor", "use_dtype",
]
