"""
Differentiable primitives over :py:class:`.Tensor`.

Every primitive checks its output is finite and, when gradients are enabled and any operand requires them,
records a backward function returning one gradient per operand.
"""
from collections.abc import Sequence
from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from pstl_cli.exception import NumericFaultError, ShapeMismatchError, InvalidInputError
from pstl_cli.numerics.tensor import Tensor, BackwardFn, is_grad_enabled

type Operand = Tensor | float | np.ndarray


def as_tensor(value: Operand) -> Tensor:
    """Wrap ``value`` in a constant tensor unless it already is one"""
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(op: str, values: np.ndarray, parents: Sequence[Tensor], backward_fn: BackwardFn) -> Tensor:
    if not np.all(np.isfinite(values)):
        raise NumericFaultError(f"Primitive '{op}' produced non-finite values")

    out = Tensor(values)
    out.op = op
    if is_grad_enabled() and any(parent.requires_grad for parent in parents):
        out.requires_grad = True
        out.parents = tuple(parents)
        out.backward_fn = backward_fn
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape``, reversing numpy broadcasting"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast(op: str, a: Tensor, b: Tensor, func: Any) -> np.ndarray:
    try:
        return func(a.values, b.values)
    except ValueError as ex:
        raise ShapeMismatchError(f"Operands of '{op}' cannot be broadcast", a.shape, b.shape) from ex


###########################################################################
## Elementwise
###########################################################################
def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    values = _broadcast("add", a, b, np.add)

    def backward(grad: np.ndarray):
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)

    return _result("add", values, (a, b), backward)


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    values = _broadcast("sub", a, b, np.subtract)

    def backward(grad: np.ndarray):
        return _unbroadcast(grad, a.shape), _unbroadcast(-grad, b.shape)

    return _result("sub", values, (a, b), backward)


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    values = _broadcast("mul", a, b, np.multiply)

    def backward(grad: np.ndarray):
        return _unbroadcast(grad * b.values, a.shape), _unbroadcast(grad * a.values, b.shape)

    return _result("mul", values, (a, b), backward)


def div(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = _broadcast("div", a, b, np.divide)

    def backward(grad: np.ndarray):
        grad_a = grad / b.values
        grad_b = -grad * a.values / (b.values * b.values)
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return _result("div", values, (a, b), backward)


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiply every value of ``a`` by a constant ``factor``"""
    def backward(grad: np.ndarray):
        return (grad * factor,)

    return _result("scale", a.values * factor, (a,), backward)


def relu(a: Tensor) -> Tensor:
    active = a.values > 0

    def backward(grad: np.ndarray):
        return (grad * active,)

    return _result("relu", np.where(active, a.values, 0.0), (a,), backward)


def sqrt(a: Tensor) -> Tensor:
    with np.errstate(invalid="ignore"):
        values = np.sqrt(a.values)

    def backward(grad: np.ndarray):
        with np.errstate(divide="ignore"):
            return (grad / (2.0 * values),)

    return _result("sqrt", values, (a,), backward)


###########################################################################
## Linear algebra
###########################################################################
def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Product of two matrices"""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatchError("matmul needs matrices [n, k] and [k, m]", a.shape, b.shape)

    def backward(grad: np.ndarray):
        return grad @ b.values.T, a.values.T @ grad

    return _result("matmul", a.values @ b.values, (a, b), backward)


def batched_matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes, broadcasting all leading axes"""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatchError("batched matmul needs [..., n, k] and [..., k, m]", a.shape, b.shape)
    values = _broadcast("batched_matmul", a, b, np.matmul)

    def backward(grad: np.ndarray):
        grad_a = np.matmul(grad, np.swapaxes(b.values, -1, -2))
        grad_b = np.matmul(np.swapaxes(a.values, -1, -2), grad)
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return _result("batched_matmul", values, (a, b), backward)


def temporal_conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """
    Convolution along the frame axis, applied to every joint independently.
    Zero padding on both sides keeps the frame count.

    :param x: Input of shape ``[N, C_in, T, V]``.
    :param weight: Kernel of shape ``[C_out, C_in, k]`` for odd ``k``.
    :param bias: Optional bias of shape ``[C_out]``.
    """
    if x.ndim != 4 or weight.ndim != 3 or x.shape[1] != weight.shape[1]:
        raise ShapeMismatchError("temporal_conv1d needs input [N, C_in, T, V] and kernel [C_out, C_in, k]",
                                 x.shape, weight.shape)
    kernel = weight.shape[2]
    if kernel % 2 == 0:
        raise InvalidInputError(f"Temporal kernel size must be odd, got {kernel}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeMismatchError("Bias does not match the output channels", bias.shape, (weight.shape[0],))

    pad = kernel // 2
    frames = x.shape[2]
    padded = np.pad(x.values, ((0, 0), (0, 0), (pad, pad), (0, 0)))
    windows = sliding_window_view(padded, kernel, axis=2)  # [N, C_in, T, V, k]
    values = np.einsum("nctvk,ock->notv", windows, weight.values, optimize=True)
    if bias is not None:
        values = values + bias.values[None, :, None, None]

    def backward(grad: np.ndarray):
        grad_weight = np.einsum("nctvk,notv->ock", windows, grad, optimize=True)
        grad_padded = np.zeros_like(padded)
        for offset in range(kernel):
            grad_padded[:, :, offset:offset + frames] += np.einsum(
                "notv,oc->nctv", grad, weight.values[:, :, offset], optimize=True
            )
        grad_x = grad_padded[:, :, pad:pad + frames]
        grad_bias = grad.sum(axis=(0, 2, 3)) if bias is not None else None
        return grad_x, grad_weight, grad_bias

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _result("temporal_conv1d", values, parents, backward)


###########################################################################
## Normalisation
###########################################################################
def batch_norm(
        x: Tensor,
        gamma: Tensor,
        beta: Tensor,
        running_mean: np.ndarray,
        running_var: np.ndarray,
        training: bool,
        momentum: float = 0.1,
        eps: float = 1e-5,
) -> Tensor:
    """
    Normalise every channel (axis 1) over all other axes.

    In training mode, batch statistics are used and the running statistics are updated in place
    with the unbiased batch variance. In evaluation mode, the running statistics are used.

    :raise InvalidInputError: When training on fewer than 2 samples.
    """
    if x.ndim < 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeMismatchError("batch_norm parameters must match the channel axis", x.shape, gamma.shape)

    axes = tuple(axis for axis in range(x.ndim) if axis != 1)
    shape = tuple(x.shape[1] if axis == 1 else 1 for axis in range(x.ndim))

    if training:
        if x.shape[0] < 2:
            raise InvalidInputError(f"batch_norm in training mode needs a batch of at least 2, got {x.shape[0]}")
        count = x.size // x.shape[1]
        mean = x.values.mean(axis=axes)
        var = x.values.var(axis=axes)

        running_mean *= 1 - momentum
        running_mean += momentum * mean
        running_var *= 1 - momentum
        running_var += momentum * var * count / max(count - 1, 1)
    else:
        count = None
        mean = running_mean
        var = running_var

    inv_std = 1.0 / np.sqrt(var + eps)
    normalised = (x.values - mean.reshape(shape)) * inv_std.reshape(shape)
    values = normalised * gamma.values.reshape(shape) + beta.values.reshape(shape)

    def backward(grad: np.ndarray):
        grad_gamma = (grad * normalised).sum(axis=axes)
        grad_beta = grad.sum(axis=axes)
        grad_normalised = grad * gamma.values.reshape(shape)

        if not training:
            return grad_normalised * inv_std.reshape(shape), grad_gamma, grad_beta

        grad_x = (
            count * grad_normalised
            - grad_normalised.sum(axis=axes, keepdims=True)
            - normalised * (grad_normalised * normalised).sum(axis=axes, keepdims=True)
        ) * (inv_std.reshape(shape) / count)
        return grad_x, grad_gamma, grad_beta

    return _result("batch_norm", values, (x, gamma, beta), backward)


###########################################################################
## Reductions & shape
###########################################################################
def _axes(ndim: int, axes: int | Sequence[int] | None) -> tuple[int, ...]:
    if axes is None:
        return tuple(range(ndim))
    axes = (axes,) if isinstance(axes, int) else tuple(axes)
    return tuple(axis % ndim for axis in axes)


def sum(a: Tensor, axes: int | Sequence[int] | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    axes = _axes(a.ndim, axes)
    values = a.values.sum(axis=axes, keepdims=keepdims)

    def backward(grad: np.ndarray):
        if not keepdims:
            grad = np.expand_dims(grad, axes)
        return (np.broadcast_to(grad, a.shape).copy(),)

    return _result("sum", values, (a,), backward)


def mean_pool(a: Tensor, axes: int | Sequence[int] | None = None, keepdims: bool = False) -> Tensor:
    """Mean over the given ``axes``"""
    axes = _axes(a.ndim, axes)
    count = int(np.prod([a.shape[axis] for axis in axes]))
    values = a.values.mean(axis=axes, keepdims=keepdims)

    def backward(grad: np.ndarray):
        if not keepdims:
            grad = np.expand_dims(grad, axes)
        return (np.broadcast_to(grad / count, a.shape).copy(),)

    return _result("mean_pool", values, (a,), backward)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        values = a.values.reshape(tuple(shape))
    except ValueError as ex:
        raise ShapeMismatchError("Cannot reshape", a.shape, tuple(shape)) from ex

    def backward(grad: np.ndarray):
        return (grad.reshape(a.shape),)

    return _result("reshape", values, (a,), backward)


def transpose(a: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    """Permute the axes of ``a``. Reverses them when ``axes`` is not given"""
    axes = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeMismatchError("Transpose axes are not a permutation of the tensor axes", a.shape, axes)
    inverse = tuple(np.argsort(axes))

    def backward(grad: np.ndarray):
        return (np.transpose(grad, inverse),)

    return _result("transpose", np.transpose(a.values, axes), (a,), backward)


def gather(a: Tensor, indices: Sequence[int] | np.ndarray, axis: int = 0) -> Tensor:
    """Select ``indices`` along ``axis``. Gradients flow back to the selected positions only"""
    axis = axis % a.ndim
    indices = np.asarray(indices, dtype=np.int64)
    if indices.ndim != 1 or np.any(indices < 0) or np.any(indices >= a.shape[axis]):
        raise InvalidInputError(f"Gather indices must be a flat array in [0, {a.shape[axis]})")

    def backward(grad: np.ndarray):
        full = np.zeros_like(a.values)
        index = (slice(None),) * axis + (indices,)
        np.add.at(full, index, grad)
        return (full,)

    return _result("gather", np.take(a.values, indices, axis=axis), (a,), backward)


###########################################################################
## Losses
###########################################################################
def cross_entropy(logits: Tensor, labels: Sequence[int] | np.ndarray) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under the softmax of ``logits`` ``[N, classes]``"""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeMismatchError("Logits [N, classes] and labels [N] do not match", logits.shape, labels.shape)

    shifted = logits.values - logits.values.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    count = logits.shape[0]
    rows = np.arange(count)

    def backward(grad: np.ndarray):
        probs = np.exp(log_probs)
        probs[rows, labels] -= 1.0
        return (probs * (grad / count),)

    return _result("cross_entropy", np.asarray(-log_probs[rows, labels].mean()), (logits,), backward)
