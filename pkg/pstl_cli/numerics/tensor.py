"""
A dense tensor recording the primitives applied to it, and the tape that replays them in reverse.
"""
from __future__ import annotations

from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Any

import numpy as np

from pstl_cli.exception import ShapeMismatchError

type BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_GRAD_ENABLED: ContextVar[bool] = ContextVar("grad_enabled", default=True)


def is_grad_enabled() -> bool:
    """Whether primitives currently record themselves for backward passes"""
    return _GRAD_ENABLED.get()


@contextmanager
def no_grad() -> Iterator[None]:
    """Context in which primitives record nothing and produce constant tensors."""
    token = _GRAD_ENABLED.set(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.reset(token)


class Tensor:
    """
    A 64-bit float array with an optional gradient.

    :param values: The array values. Always stored as float64.
    :param requires_grad: Whether gradients are accumulated into this tensor on backward passes.
    :param name: Optional name used when reporting on this tensor.
    """

    __slots__ = ("values", "requires_grad", "grad", "name", "parents", "backward_fn", "op")

    def __init__(self, values: Any, requires_grad: bool = False, name: str | None = None):
        self.values: np.ndarray = np.asarray(values, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name

        self.parents: tuple[Tensor, ...] = ()
        self.backward_fn: BackwardFn | None = None
        self.op: str | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def is_leaf(self) -> bool:
        """Whether this tensor was created directly rather than by a primitive"""
        return self.backward_fn is None

    def item(self) -> float:
        if self.size != 1:
            raise ShapeMismatchError("Only single value tensors can be converted to a scalar", self.shape, ())
        return float(self.values.reshape(()))

    def numpy(self) -> np.ndarray:
        """A copy of the values of this tensor"""
        return self.values.copy()

    def detach(self) -> Tensor:
        """A constant tensor sharing this tensor's values"""
        return Tensor(self.values)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, grad: np.ndarray) -> None:
        """Add ``grad`` to the stored gradient"""
        if grad.shape != self.shape:
            raise ShapeMismatchError("Gradient does not match the shape of its tensor", grad.shape, self.shape)
        self.grad = grad.copy() if self.grad is None else self.grad + grad

    def backward(self) -> ComputationTape:
        """
        Accumulate gradients of this scalar tensor into every tensor it was computed from.

        :return: The tape that was replayed.
        :raise ShapeMismatchError: When this tensor is not a scalar.
        """
        tape = ComputationTape.from_output(self)
        tape.backward()
        return tape

    def __repr__(self) -> str:
        name = f"{self.name!r}, " if self.name else ""
        return f"{self.__class__.__name__}({name}shape={self.shape}, requires_grad={self.requires_grad})"

    ###########################################################################
    ## Operators
    ###########################################################################
    def __add__(self, other: Tensor | float) -> Tensor:
        from pstl_cli.numerics import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other: Tensor | float) -> Tensor:
        from pstl_cli.numerics import ops
        return ops.sub(self, other)

    def __rsub__(self, other: Tensor | float) -> Tensor:
        from pstl_cli.numerics import ops
        return ops.sub(other, self)

    def __mul__(self, other: Tensor | float) -> Tensor:
        from pstl_cli.numerics import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: Tensor | float) -> Tensor:
        from pstl_cli.numerics import ops
        return ops.div(self, other)

    def __neg__(self) -> Tensor:
        from pstl_cli.numerics import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other: Tensor) -> Tensor:
        from pstl_cli.numerics import ops
        return ops.batched_matmul(self, other)


class ComputationTape:
    """
    The primitives leading to an output in topological order.

    :param nodes: Tensors ordered so every tensor comes after all tensors it was computed from.
    """

    __slots__ = ("nodes",)

    def __init__(self, nodes: Sequence[Tensor]):
        self.nodes = tuple(nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[Tensor]:
        return iter(self.nodes)

    @classmethod
    def from_output(cls, output: Tensor) -> ComputationTape:
        """Record every tensor ``output`` depends on which takes part in gradient computation"""
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(output, False)]

        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))

            stack.append((node, True))
            for parent in reversed(node.parents):
                if id(parent) not in visited and parent.requires_grad:
                    stack.append((parent, False))

        return cls(order)

    def backward(self) -> None:
        """
        Replay the tape in reverse, visiting every node once.

        :raise ShapeMismatchError: When the output is not a scalar.
        """
        output = self.nodes[-1]
        if output.size != 1:
            raise ShapeMismatchError("Backward passes start from a scalar", output.shape, ())

        grads: dict[int, np.ndarray] = {id(output): np.ones_like(output.values)}
        for node in reversed(self.nodes):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue

            if node.is_leaf:
                node.accumulate(grad)
                continue

            for parent, parent_grad in zip(node.parents, node.backward_fn(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + parent_grad if key in grads else parent_grad
