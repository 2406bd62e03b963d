"""Minimal tensor library with reverse-mode autodiff."""

from . import functional
from .functional import (
    add,
    avg_pool2d,
    concat,
    conv2d,
    cross_entropy,
    exp,
    gather,
    linear,
    log,
    log_softmax,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    scale,
    softmax,
    sub,
    sum,
    transpose,
)
from .gradcheck import check_gradients, numeric_grad, relative_error
from .tensor import (
    DEFAULT_DTYPE,
    ContractError,
    DimensionError,
    Tensor,
    as_tensor,
    is_grad_enabled,
    no_grad,
)

__all__ = [
    "DEFAULT_DTYPE",
    "ContractError",
    "DimensionError",
    "Tensor",
    "add",
    "as_tensor",
    "avg_pool2d",
    "check_gradients",
    "concat",
    "conv2d",
    "cross_entropy",
    "exp",
    "functional",
    "gather",
    "is_grad_enabled",
    "linear",
    "log",
    "log_softmax",
    "matmul",
    "mean",
    "mul",
    "no_grad",
    "numeric_grad",
    "relative_error",
    "relu",
    "reshape",
    "scale",
    "softmax",
    "sub",
    "sum",
    "transpose",
]
