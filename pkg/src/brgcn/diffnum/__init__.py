"""Numeric substrate: float64 tensors, reverse-mode tape, gradient oracle."""

from .checkpoint import FORMAT_VERSION, CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import DeterminismError, GradCheckReport, grad_check
from .tensor import (
    DiffnumError,
    DimensionError,
    NumericError,
    Tape,
    Tensor,
    active_tape,
    add,
    clip_min,
    concat,
    dot,
    exp,
    leaky_relu,
    log,
    l2_norm,
    matmul,
    mul,
    neg,
    param,
    record_op,
    relu,
    reshape,
    sigmoid,
    softmax,
    softmax_rows,
    segment_softmax,
    segment_sum,
    stack,
    sub,
    take,
    transpose,
    tsum,
    zero_grad,
)

__all__ = [
    "FORMAT_VERSION",
    "CheckpointError",
    "load_checkpoint",
    "save_checkpoint",
    "DeterminismError",
    "GradCheckReport",
    "grad_check",
    "DiffnumError",
    "DimensionError",
    "NumericError",
    "Tape",
    "Tensor",
    "active_tape",
    "add",
    "clip_min",
    "concat",
    "dot",
    "exp",
    "leaky_relu",
    "log",
    "l2_norm",
    "matmul",
    "mul",
    "neg",
    "param",
    "record_op",
    "relu",
    "reshape",
    "sigmoid",
    "softmax",
    "softmax_rows",
    "segment_softmax",
    "segment_sum",
    "stack",
    "sub",
    "take",
    "transpose",
    "tsum",
    "zero_grad",
]
