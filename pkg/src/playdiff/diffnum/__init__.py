"""Differentiable array expressions: forward evaluation + reverse-mode gradients."""

from .core import (
    DiffExpr,
    EvalError,
    ShapeError,
    add,
    broadcast_to,
    concatenate,
    const,
    div,
    evaluate,
    exp,
    frame_diff,
    gather,
    gelu,
    gradient,
    l2_norm,
    layer_norm,
    leaf,
    log,
    matmul,
    max_,
    mean,
    min_,
    mul,
    neg,
    relu,
    reshape,
    sigmoid,
    slice_,
    softmax,
    sqrt,
    sub,
    sum_,
    topk_mask,
    transpose,
    value_and_gradient,
    var,
)
from .check import grad_check

__all__ = [
    "DiffExpr",
    "EvalError",
    "ShapeError",
    "add",
    "broadcast_to",
    "concatenate",
    "const",
    "div",
    "evaluate",
    "exp",
    "frame_diff",
    "gather",
    "gelu",
    "grad_check",
    "gradient",
    "l2_norm",
    "layer_norm",
    "leaf",
    "log",
    "matmul",
    "max_",
    "mean",
    "min_",
    "mul",
    "neg",
    "relu",
    "reshape",
    "sigmoid",
    "slice_",
    "softmax",
    "sqrt",
    "sub",
    "sum_",
    "topk_mask",
    "transpose",
    "value_and_gradient",
    "var",
]
