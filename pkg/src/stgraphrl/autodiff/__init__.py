"""Dense float64 tensors with reverse-mode differentiation and an adaptive-moment optimizer."""

from stgraphrl.autodiff.gradcheck import NonDeterministicFunctionError, grad_check
from stgraphrl.autodiff.optim import AdamSettings, MissingGradientError, OptimState, optimizer_step
from stgraphrl.autodiff.tensor import (
    NORM_EPSILON,
    Tensor,
    TensorDomainError,
    TensorShapeError,
    apply_elementwise,
    backward,
    clamp_min,
    concat,
    gather_rows,
    l2_norm,
    matmul,
    no_grad,
    reduce,
    reshape,
    segment_softmax,
    segment_sum,
    tensor_new,
)

__all__ = [
    "NORM_EPSILON",
    "AdamSettings",
    "MissingGradientError",
    "NonDeterministicFunctionError",
    "OptimState",
    "Tensor",
    "TensorDomainError",
    "TensorShapeError",
    "apply_elementwise",
    "backward",
    "clamp_min",
    "concat",
    "gather_rows",
    "grad_check",
    "l2_norm",
    "matmul",
    "no_grad",
    "optimizer_step",
    "reduce",
    "reshape",
    "segment_softmax",
    "segment_sum",
    "tensor_new",
]
