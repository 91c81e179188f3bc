from collections.abc import Callable

import numpy as np
import pytest

from pstl_cli.exception import NumericFaultError, ShapeMismatchError, InvalidInputError
from pstl_cli.numerics import Tensor, grad_check
from pstl_cli.numerics import ops


def assert_gradients(fn: Callable[[], Tensor], **inputs: Tensor) -> None:
    report = grad_check(fn, inputs, epsilon=1e-6, tolerance=1e-6)
    assert report.passed, report.errors


class TestElementwise:

    @pytest.fixture
    def a(self, rng: np.random.Generator) -> Tensor:
        return Tensor(rng.normal(size=(3, 4)))

    @pytest.fixture
    def b(self, rng: np.random.Generator) -> Tensor:
        return Tensor(rng.uniform(0.5, 2.0, size=(1, 4)))

    @pytest.mark.parametrize("op", [ops.add, ops.sub, ops.mul, ops.div])
    def test_broadcast_gradients(self, a: Tensor, b: Tensor, op):
        assert_gradients(lambda: ops.sum(op(a, b) * op(a, b)), a=a, b=b)

    def test_scale_and_sqrt(self, b: Tensor):
        assert_gradients(lambda: ops.sum(ops.sqrt(ops.scale(b, 3.0))), b=b)

    def test_relu(self):
        x = Tensor([-1.0, 0.5, 2.0], requires_grad=True)
        out = ops.relu(x)
        assert out.values.tolist() == [0.0, 0.5, 2.0]
        ops.sum(out).backward()
        assert x.grad.tolist() == [0.0, 1.0, 1.0]

    def test_broadcast_mismatch_fails(self):
        with pytest.raises(ShapeMismatchError):
            ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))

    def test_non_finite_fails(self):
        with pytest.raises(NumericFaultError):
            ops.div(Tensor([1.0]), Tensor([0.0]))
        with pytest.raises(NumericFaultError):
            ops.sqrt(Tensor([-1.0]))


class TestLinearAlgebra:

    def test_matmul(self, rng: np.random.Generator):
        a = Tensor(rng.normal(size=(3, 4)))
        b = Tensor(rng.normal(size=(4, 2)))
        assert np.allclose(ops.matmul(a, b).values, a.values @ b.values)
        assert_gradients(lambda: ops.sum(ops.matmul(a, b) * ops.matmul(a, b)), a=a, b=b)

        with pytest.raises(ShapeMismatchError):
            ops.matmul(a, a)

    def test_batched_matmul_broadcasts(self, rng: np.random.Generator):
        adjacency = Tensor(rng.normal(size=(5, 5)))
        x = Tensor(rng.normal(size=(2, 3, 4, 5)))
        out = ops.batched_matmul(x, adjacency)
        assert out.shape == (2, 3, 4, 5)
        assert_gradients(
            lambda: ops.sum(ops.batched_matmul(x, adjacency) * ops.batched_matmul(x, adjacency)), x=x, adjacency=adjacency
        )

    def test_batched_matmul_per_sample(self, rng: np.random.Generator):
        adjacency = Tensor(rng.normal(size=(2, 1, 4, 4)))
        x = Tensor(rng.normal(size=(2, 3, 6, 4)))
        out = ops.batched_matmul(x, adjacency)
        assert np.allclose(out.values[1], x.values[1] @ adjacency.values[1, 0])

        with pytest.raises(ShapeMismatchError):
            ops.batched_matmul(x, Tensor(np.ones((3, 3))))

    def test_temporal_conv1d(self, rng: np.random.Generator):
        x = Tensor(rng.normal(size=(2, 3, 7, 4)))
        weight = Tensor(rng.normal(size=(5, 3, 3)))
        bias = Tensor(rng.normal(size=(5,)))

        out = ops.temporal_conv1d(x, weight, bias)
        assert out.shape == (2, 5, 7, 4)

        # oracle at an interior frame and at the zero padded first frame
        n, o, t, v = 1, 2, 3, 1
        expected = bias.values[o] + sum(
            weight.values[o, c, k] * x.values[n, c, t + k - 1, v] for c in range(3) for k in range(3)
        )
        assert np.isclose(out.values[n, o, t, v], expected)
        expected = bias.values[o] + sum(
            weight.values[o, c, k] * x.values[n, c, k - 1, v] for c in range(3) for k in range(1, 3)
        )
        assert np.isclose(out.values[n, o, 0, v], expected)

        assert_gradients(
            lambda: ops.sum(ops.temporal_conv1d(x, weight, bias) * ops.temporal_conv1d(x, weight, bias)),
            x=x, weight=weight, bias=bias,
        )

    def test_temporal_conv1d_fails_on_bad_shapes(self, rng: np.random.Generator):
        x = Tensor(rng.normal(size=(2, 3, 7, 4)))
        with pytest.raises(ShapeMismatchError):
            ops.temporal_conv1d(x, Tensor(np.ones((5, 2, 3))))
        with pytest.raises(InvalidInputError):
            ops.temporal_conv1d(x, Tensor(np.ones((5, 3, 2))))
        with pytest.raises(ShapeMismatchError):
            ops.temporal_conv1d(x, Tensor(np.ones((5, 3, 3))), Tensor(np.ones(4)))


class TestBatchNorm:

    @pytest.fixture
    def params(self) -> tuple[Tensor, Tensor]:
        return Tensor(np.array([1.5, 0.5, 2.0])), Tensor(np.array([0.1, -0.2, 0.3]))

    def test_training_normalises_channels(self, rng: np.random.Generator, params: tuple[Tensor, Tensor]):
        x = Tensor(rng.normal(2.0, 3.0, size=(4, 3, 5, 2)))
        running_mean, running_var = np.zeros(3), np.ones(3)
        out = ops.batch_norm(x, Tensor(np.ones(3)), Tensor(np.zeros(3)), running_mean, running_var, training=True)

        assert np.allclose(out.values.mean(axis=(0, 2, 3)), 0.0, atol=1e-12)
        assert np.allclose(out.values.var(axis=(0, 2, 3)), 1.0, atol=1e-4)

        count = 4 * 5 * 2
        batch_mean = x.values.mean(axis=(0, 2, 3))
        batch_var = x.values.var(axis=(0, 2, 3)) * count / (count - 1)
        assert np.allclose(running_mean, 0.1 * batch_mean)
        assert np.allclose(running_var, 0.9 + 0.1 * batch_var)

    def test_gradients(self, rng: np.random.Generator, params: tuple[Tensor, Tensor]):
        gamma, beta = params
        x = Tensor(rng.normal(size=(4, 3, 5, 2)))
        weights = rng.normal(size=x.shape)

        for training in (True, False):
            def fn():
                out = ops.batch_norm(x, gamma, beta, np.zeros(3), np.ones(3), training=training)
                return ops.sum(out * weights)

            assert_gradients(fn, x=x, gamma=gamma, beta=beta)

    def test_eval_uses_running_statistics(self, rng: np.random.Generator, params: tuple[Tensor, Tensor]):
        gamma, beta = params
        x = Tensor(rng.normal(size=(1, 3, 2)))
        running_mean, running_var = np.array([1.0, 2.0, 3.0]), np.array([4.0, 1.0, 0.25])
        out = ops.batch_norm(x, gamma, beta, running_mean, running_var, training=False, eps=0.0)

        expected = (x.values - running_mean[None, :, None]) / np.sqrt(running_var)[None, :, None]
        expected = expected * gamma.values[None, :, None] + beta.values[None, :, None]
        assert np.allclose(out.values, expected)

    def test_training_needs_two_samples(self, params: tuple[Tensor, Tensor]):
        with pytest.raises(InvalidInputError):
            ops.batch_norm(Tensor(np.ones((1, 3, 2))), *params, np.zeros(3), np.ones(3), training=True)


class TestReductions:

    def test_sum_and_mean_pool(self, rng: np.random.Generator):
        x = Tensor(rng.normal(size=(2, 3, 4)))
        assert np.allclose(ops.sum(x, axes=(0, 2)).values, x.values.sum(axis=(0, 2)))
        assert np.allclose(ops.mean_pool(x, axes=-1, keepdims=True).values, x.values.mean(axis=-1, keepdims=True))

        weights = rng.normal(size=3)
        assert_gradients(lambda: ops.sum(ops.mean_pool(x, axes=(0, 2)) * weights), x=x)
        assert_gradients(lambda: ops.sum(ops.sum(x, axes=1, keepdims=True) * ops.sum(x, axes=1, keepdims=True)), x=x)

    def test_reshape_and_transpose(self, rng: np.random.Generator):
        x = Tensor(rng.normal(size=(2, 3, 4)))
        weights = rng.normal(size=(4, 2, 3))

        assert ops.reshape(x, (6, 4)).shape == (6, 4)
        assert np.array_equal(ops.transpose(x, (2, 0, 1)).values, np.transpose(x.values, (2, 0, 1)))
        assert ops.transpose(x).shape == (4, 3, 2)
        assert_gradients(lambda: ops.sum(ops.transpose(ops.reshape(x, (2, 3, 4)), (2, 0, 1)) * weights), x=x)

        with pytest.raises(ShapeMismatchError):
            ops.reshape(x, (5, 5))
        with pytest.raises(ShapeMismatchError):
            ops.transpose(x, (0, 0, 1))

    def test_gather(self, rng: np.random.Generator):
        x = Tensor(rng.normal(size=(2, 5)), requires_grad=True)
        out = ops.gather(x, [4, 1, 1], axis=1)
        assert np.array_equal(out.values, x.values[:, [4, 1, 1]])

        ops.sum(out).backward()
        assert x.grad.tolist() == [[0, 2, 0, 0, 1]] * 2

        with pytest.raises(InvalidInputError):
            ops.gather(x, [5], axis=1)


class TestCrossEntropy:

    def test_value(self):
        logits = Tensor([[2.0, 0.0], [0.0, 0.0]])
        expected = (-np.log(np.exp(2) / (np.exp(2) + 1)) + np.log(2)) / 2
        assert ops.cross_entropy(logits, [0, 1]).item() == pytest.approx(expected)

    def test_stable_for_large_logits(self):
        logits = Tensor([[1000.0, 0.0], [0.0, 1000.0]])
        assert ops.cross_entropy(logits, [0, 1]).item() == pytest.approx(0.0)

    def test_gradients(self, rng: np.random.Generator):
        logits = Tensor(rng.normal(size=(5, 3)))
        labels = rng.integers(0, 3, size=5)
        assert_gradients(lambda: ops.cross_entropy(logits, labels), logits=logits)

    def test_label_mismatch_fails(self):
        with pytest.raises(ShapeMismatchError):
            ops.cross_entropy(Tensor(np.zeros((3, 2))), [0, 1])
