"""
Verification of analytic gradients against central finite differences.
"""
import logging
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np

from pstl_cli.exception import ShapeMismatchError, GradCheckError
from pstl_cli.numerics.tensor import Tensor

LOGGER = logging.getLogger(__name__)

#: Gradients whose magnitude stays below this are compared absolutely.
ABSOLUTE_FLOOR = 1e-8


def relative_errors(
        analytic: np.ndarray, numeric: np.ndarray, relative_floor: float = 1.0
) -> np.ndarray:
    """
    Element-wise relative error ``|a - n| / max(|a|, |n|, floor)``.

    The floor is ``relative_floor`` times the largest gradient magnitude of the tensor, and never below
    :py:data:`ABSOLUTE_FLOOR`. At ``1.0`` every element is judged against the tensor's largest gradient,
    so an error on a near-zero element counts only in proportion to that scale.
    Smaller values judge each element against its own magnitude.
    """
    scale = max(float(np.abs(analytic).max(initial=0.0)), float(np.abs(numeric).max(initial=0.0)))
    floor = max(relative_floor * scale, ABSOLUTE_FLOOR)
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)


@dataclass
class GradCheckReport:
    """
    The outcome of a gradient check.

    :param errors: Max relative error per named input.
    :param kinks: Per named input, the number of elements whose finite difference step had to be shrunk
        because it crossed a point where the function is not smooth.
    """
    epsilon: float
    tolerance: float
    errors: dict[str, float] = field(default_factory=dict)
    kinks: dict[str, int] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance

    def as_dict(self) -> dict[str, object]:
        return {
            "epsilon": self.epsilon,
            "tolerance": self.tolerance,
            "max_error": self.max_error,
            "passed": self.passed,
            "errors": dict(self.errors),
            "kinks": dict(self.kinks),
        }

    def raise_for_failure(self) -> None:
        """
        :raise GradCheckError: When any error exceeds the tolerance.
        """
        if self.passed:
            return
        failed = {name: error for name, error in self.errors.items() if error > self.tolerance}
        raise GradCheckError(
            f"Analytic gradients disagree with finite differences beyond {self.tolerance:g}: "
            + ", ".join(f"{name}={error:.3g}" for name, error in failed.items())
        )


def _evaluate(fn: Callable[[], Tensor]) -> float:
    out = fn()
    if out.size != 1:
        raise ShapeMismatchError("Gradient checks need a scalar function", out.shape, ())
    return out.item()


def _central_difference(fn: Callable[[], Tensor], values: np.ndarray, index: tuple[int, ...], step: float) -> float:
    original = values[index]
    try:
        values[index] = original + step
        upper = _evaluate(fn)
        values[index] = original - step
        lower = _evaluate(fn)
    finally:
        values[index] = original
    return (upper - lower) / (2 * step)


def grad_check(
        fn: Callable[[], Tensor],
        inputs: Mapping[str, Tensor],
        epsilon: float = 1e-5,
        tolerance: float = 1e-4,
        refinements: int = 3,
        relative_floor: float = 1.0,
) -> GradCheckReport:
    """
    Compare the gradients of scalar ``fn`` with respect to ``inputs`` against central differences.

    Each finite difference is taken at ``epsilon`` and at half of it. When both disagree, the step straddles
    a kink (e.g. a rectifier switching) and is shrunk tenfold, up to ``refinements`` times.
    The error of an input is the max over its elements of :py:func:`relative_errors`.
    With the default ``relative_floor`` this is the max absolute difference divided by the largest
    gradient magnitude of the input. Lower it to catch errors on elements with small gradients.

    :param fn: Computes the scalar from the current values of ``inputs``.
    :param inputs: Named tensors to check. Their values are perturbed in place and restored.
    :param epsilon: The finite difference step.
    :param tolerance: The max relative error for the check to pass.
    :param refinements: How many times a step straddling a kink may be shrunk.
    :param relative_floor: Fraction of an input's largest gradient below which elements are compared absolutely.
    :raise ShapeMismatchError: When ``fn`` does not return a scalar.
    """
    for tensor in inputs.values():
        tensor.requires_grad = True
        tensor.zero_grad()

    out = fn()
    if out.size != 1:
        raise ShapeMismatchError("Gradient checks need a scalar function", out.shape, ())
    out.backward()

    report = GradCheckReport(epsilon=epsilon, tolerance=tolerance)
    for name, tensor in inputs.items():
        analytic = tensor.grad if tensor.grad is not None else np.zeros(tensor.shape)
        scale = max(float(np.abs(analytic).max(initial=0.0)), ABSOLUTE_FLOOR)
        numeric = np.zeros(tensor.shape)
        kinks = 0

        for index in np.ndindex(*tensor.shape):
            step = epsilon
            estimate = _central_difference(fn, tensor.values, index, step)
            for _ in range(refinements):
                half = _central_difference(fn, tensor.values, index, step / 2)
                if abs(estimate - half) <= 0.1 * tolerance * scale:
                    break
                kinks += 1
                step /= 10
                estimate = _central_difference(fn, tensor.values, index, step)
            numeric[index] = estimate

        report.errors[name] = float(relative_errors(analytic, numeric, relative_floor).max(initial=0.0))
        report.kinks[name] = kinks

        LOGGER.debug(f"Gradient check {name}: relative error {report.errors[name]:.3g}, kinks {kinks}")

    return report
