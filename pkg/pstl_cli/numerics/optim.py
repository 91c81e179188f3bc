"""
The Adam optimiser over named parameters.
"""
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from pstl_cli.exception import ShapeMismatchError
from pstl_cli.numerics.tensor import Tensor


@dataclass
class AdamState:
    """
    First and second moment estimates for every named parameter.

    :param first: The first moment estimate per parameter.
    :param second: The second moment estimate per parameter.
    :param step: The number of updates applied so far.
    """
    first: dict[str, np.ndarray] = field(default_factory=dict)
    second: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def for_parameters(cls, parameters: Mapping[str, Tensor]) -> "AdamState":
        """Zeroed moments matching every parameter's shape"""
        return cls(
            first={name: np.zeros(param.shape) for name, param in parameters.items()},
            second={name: np.zeros(param.shape) for name, param in parameters.items()},
        )


def adam_step(
        state: AdamState,
        parameters: Mapping[str, Tensor],
        grads: Mapping[str, np.ndarray | None],
        lr: float,
        weight_decay: float = 0.0,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
) -> AdamState:
    """
    Apply one bias-corrected Adam update to ``parameters`` in place.

    Weight decay is coupled: ``weight_decay * θ`` is added to the gradient before the moments are updated.

    :param state: The moment estimates. Updated in place and returned.
    :param parameters: The parameters to update.
    :param grads: The gradient for every parameter. Missing or None gradients count as zero.
    :param lr: The step size.
    :param weight_decay: The coupled weight decay factor.
    :param beta1: Decay rate of the first moment.
    :param beta2: Decay rate of the second moment.
    :param eps: Added to the root of the second moment estimate.
    :raise ShapeMismatchError: When a gradient or moment does not match its parameter.
    """
    state.step += 1
    correction1 = 1 - beta1 ** state.step
    correction2 = 1 - beta2 ** state.step

    for name, param in parameters.items():
        grad = grads.get(name)
        grad = np.zeros(param.shape) if grad is None else np.asarray(grad, dtype=np.float64)
        first = state.first.setdefault(name, np.zeros(param.shape))
        second = state.second.setdefault(name, np.zeros(param.shape))
        if not grad.shape == first.shape == second.shape == param.shape:
            raise ShapeMismatchError(f"Gradient or moments do not match parameter '{name}'", grad.shape, param.shape)

        if weight_decay:
            grad = grad + weight_decay * param.values

        first *= beta1
        first += (1 - beta1) * grad
        second *= beta2
        second += (1 - beta2) * grad * grad

        param.values -= lr * (first / correction1) / (np.sqrt(second / correction2) + eps)

    return state
