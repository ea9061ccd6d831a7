"""Dense float64 tensors with a reverse-mode differentiation tape."""

from mmsumm.autodiff import ops
from mmsumm.autodiff.gradcheck import grad_check, numeric_grad, relative_error
from mmsumm.autodiff.primitives import PRIMITIVES
from mmsumm.autodiff.tensor import Tape, Tensor, active_tape, apply, as_tensor

__all__ = [
    "PRIMITIVES",
    "Tape",
    "Tensor",
    "active_tape",
    "apply",
    "as_tensor",
    "grad_check",
    "numeric_grad",
    "ops",
    "relative_error",
]
