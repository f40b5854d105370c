"""Tensor arithmetic, neural building blocks and the gradient tape."""
from pairedit.numerics.gradcheck import GradCheckReport, ParamCheck, forward_backward, grad_check
from pairedit.numerics.modules import Conv2d, GroupNorm, LayerNorm, Linear, Module
from pairedit.numerics.optim import AdamW
from pairedit.numerics.tensor import DEFAULT_DTYPE, Function, Param, ShapeError, Tensor, as_tensor

__all__ = [
    "DEFAULT_DTYPE",
    "AdamW",
    "Conv2d",
    "Function",
    "GradCheckReport",
    "GroupNorm",
    "LayerNorm",
    "Linear",
    "Module",
    "Param",
    "ParamCheck",
    "ShapeError",
    "Tensor",
    "as_tensor",
    "forward_backward",
    "grad_check",
]
