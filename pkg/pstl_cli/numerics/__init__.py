"""
Dense float64 tensors with reverse-mode automatic differentiation, the Adam optimiser and gradient checking.
"""
from .tensor import Tensor, ComputationTape, no_grad, is_grad_enabled
from .gradcheck import grad_check, relative_errors, GradCheckReport
from .optim import AdamState, adam_step
