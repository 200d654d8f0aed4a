"""Minimal tensor library with reverse-mode autodiff."""

from .checkpoint import CheckpointError, load_checkpoint, load_params_into, save_checkpoint
from .functional import (
    add,
    attention,
    bce_with_logits,
    broadcast_to,
    concat,
    conv2d,
    div,
    exp,
    gelu,
    layer_norm,
    linear,
    log,
    matmul,
    mean,
    mul,
    reshape,
    sigmoid,
    softmax,
    sub,
    sum,
    tanh,
    transpose,
    transposed_conv2d,
)
from .gradcheck import GradCheckEntry, GradCheckReport, grad_check
from .params import Parameter, ParamStore, trunc_normal
from .tensor import (
    NonFiniteError,
    NumericsError,
    ShapeError,
    Tensor,
    as_tensor,
    default_dtype,
    grad_enabled,
    nan_checks,
    no_grad,
    precision,
    precision_mode,
    set_precision,
)

__all__ = [
    "Tensor",
    "Parameter",
    "ParamStore",
    "trunc_normal",
    "NumericsError",
    "NonFiniteError",
    "ShapeError",
    "as_tensor",
    "default_dtype",
    "set_precision",
    "precision",
    "precision_mode",
    "no_grad",
    "grad_enabled",
    "nan_checks",
    "add",
    "sub",
    "mul",
    "div",
    "exp",
    "log",
    "sum",
    "mean",
    "reshape",
    "transpose",
    "concat",
    "broadcast_to",
    "matmul",
    "sigmoid",
    "tanh",
    "gelu",
    "softmax",
    "layer_norm",
    "linear",
    "attention",
    "bce_with_logits",
    "conv2d",
    "transposed_conv2d",
    "grad_check",
    "GradCheckReport",
    "GradCheckEntry",
    "save_checkpoint",
    "load_checkpoint",
    "load_params_into",
    "CheckpointError",
]
