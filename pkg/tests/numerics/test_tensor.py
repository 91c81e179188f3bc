import numpy as np
import pytest

from pstl_cli.exception import ShapeMismatchError
from pstl_cli.numerics import Tensor, ComputationTape, no_grad, is_grad_enabled
from pstl_cli.numerics import ops


class TestTensor:

    def test_stores_float64(self):
        tensor = Tensor([[1, 2], [3, 4]], name="x")
        assert tensor.values.dtype == np.float64
        assert tensor.shape == (2, 2)
        assert tensor.ndim == 2
        assert tensor.size == 4
        assert tensor.is_leaf
        assert "x" in repr(tensor)

    def test_item(self):
        assert Tensor([[2.5]]).item() == 2.5
        with pytest.raises(ShapeMismatchError):
            Tensor([1.0, 2.0]).item()

    def test_numpy_and_detach(self):
        tensor = Tensor([1.0, 2.0], requires_grad=True)
        copy = tensor.numpy()
        copy[0] = 5
        assert tensor.values[0] == 1.0

        detached = tensor.detach()
        assert not detached.requires_grad
        assert detached.values is tensor.values

    def test_accumulate(self):
        tensor = Tensor([1.0, 2.0], requires_grad=True)
        tensor.accumulate(np.array([1.0, 1.0]))
        tensor.accumulate(np.array([0.5, 2.0]))
        assert tensor.grad.tolist() == [1.5, 3.0]

        with pytest.raises(ShapeMismatchError):
            tensor.accumulate(np.ones(3))

        tensor.zero_grad()
        assert tensor.grad is None

    def test_operators(self):
        a = Tensor([2.0, 4.0], requires_grad=True)
        b = Tensor([1.0, 2.0], requires_grad=True)

        assert (a + b).values.tolist() == [3.0, 6.0]
        assert (1.0 + a).values.tolist() == [3.0, 5.0]
        assert (a - b).values.tolist() == [1.0, 2.0]
        assert (10.0 - a).values.tolist() == [8.0, 6.0]
        assert (a * b).values.tolist() == [2.0, 8.0]
        assert (3.0 * a).values.tolist() == [6.0, 12.0]
        assert (a / b).values.tolist() == [2.0, 2.0]
        assert (-a).values.tolist() == [-2.0, -4.0]

        matrix = Tensor(np.eye(2))
        assert (matrix @ Tensor([[1.0], [2.0]])).values.ravel().tolist() == [1.0, 2.0]


class TestBackward:

    def test_backward_through_shared_node(self):
        x = Tensor(3.0, requires_grad=True)
        y = x * x
        z = y + y  # z = 2x^2
        z.backward()
        assert x.grad == pytest.approx(12.0)

    def test_gradients_accumulate_across_passes(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        ops.sum(x * 2.0).backward()
        ops.sum(x * 3.0).backward()
        assert x.grad.tolist() == [5.0, 5.0]

    def test_backward_needs_scalar(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ShapeMismatchError):
            (x * 2.0).backward()

    def test_constants_get_no_gradient(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        c = Tensor([3.0, 4.0])
        ops.sum(x * c).backward()
        assert x.grad.tolist() == [3.0, 4.0]
        assert c.grad is None

    def test_tape_is_topological(self):
        x = Tensor(2.0, requires_grad=True)
        a = x * 3.0
        b = a + x
        c = b * a

        tape = ComputationTape.from_output(c)
        order = {id(node): i for i, node in enumerate(tape)}
        assert len(tape) == 4
        assert order[id(x)] < order[id(a)] < order[id(b)] < order[id(c)]

        tape.backward()
        # c = (3x + x) * 3x = 12x^2
        assert x.grad == pytest.approx(48.0)

    def test_no_grad(self):
        x = Tensor([1.0], requires_grad=True)
        assert is_grad_enabled()
        with no_grad():
            assert not is_grad_enabled()
            y = x * 2.0
        assert is_grad_enabled()

        assert not y.requires_grad
        assert y.is_leaf
