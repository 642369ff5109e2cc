"""Minimal dense-tensor engine with reverse-mode autodiff and Adam."""

from .gradcheck import gradient_check, numerical_gradient, relative_error
from .optim import Adam, AdamState, adam_step
from .tensor import (
    OP_KINDS,
    Graph,
    Tensor,
    active_graph,
    add,
    as_tensor,
    backward,
    clip,
    concat,
    conv1d,
    div,
    dropout,
    exp,
    forward_op,
    layer_norm,
    linear_scan,
    log,
    lstm,
    matmul,
    mean,
    mul,
    neg,
    relu,
    reshape,
    sigmoid,
    slice_,
    softmax,
    sub,
    sum_,
    tanh,
    transpose,
)

__all__ = [
    "OP_KINDS", "Adam", "AdamState", "Graph", "Tensor", "active_graph", "adam_step",
    "add", "as_tensor", "backward", "clip", "concat", "conv1d", "div", "dropout", "exp",
    "forward_op", "gradient_check", "layer_norm", "linear_scan", "log", "lstm", "matmul", "mean",
    "mul", "neg", "numerical_gradient", "relative_error", "relu", "reshape", "sigmoid",
    "slice_", "softmax", "sub", "sum_", "tanh", "transpose",
]
