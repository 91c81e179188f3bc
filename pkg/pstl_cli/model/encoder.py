"""
A compact spatial-temporal graph convolutional encoder and the projector mapping its features to embeddings.

The encoder works on any joint count and frame count: the graph is passed in with every call,
so a sequence with masked joints is encoded with its restricted graph.
"""
import copy
import logging
from collections.abc import Iterator
from dataclasses import dataclass, field
from typing import Any, Self

import numpy as np

from pstl_cli.config.pipeline import EncoderConfig
from pstl_cli.exception import ShapeMismatchError
from pstl_cli.numerics import ops
from pstl_cli.numerics.tensor import Tensor
from pstl_cli.skeleton.topology import GraphTopology

LOGGER = logging.getLogger(__name__)

INIT_SCHEME = "fan_in_uniform"


def normalize_adjacency(topology: GraphTopology) -> np.ndarray:
    """Symmetrically normalised adjacency with self-loops: ``D^-1/2 (A + I) D^-1/2``"""
    adjacency = topology.adjacency + np.eye(topology.num_joints)
    inv_sqrt_degree = 1.0 / np.sqrt(adjacency.sum(axis=1))
    return adjacency * inv_sqrt_degree[:, None] * inv_sqrt_degree[None, :]


###########################################################################
## State
###########################################################################
def _layer_shapes(config: EncoderConfig) -> Iterator[tuple[str, tuple[int, ...], str, int]]:
    """Every trainable tensor as ``(name, shape, kind, fan_in)`` in initialisation order"""
    hidden = config.hidden_channels
    for i in range(config.num_blocks):
        channels = config.in_channels if i == 0 else hidden
        yield f"blocks.{i}.gcn.weight", (hidden, channels), "weight", channels
        yield f"blocks.{i}.gcn_bn.gamma", (hidden,), "gamma", 0
        yield f"blocks.{i}.gcn_bn.beta", (hidden,), "bias", 0
        yield f"blocks.{i}.tcn.weight", (hidden, hidden, config.temporal_kernel_size), "weight", \
            hidden * config.temporal_kernel_size
        yield f"blocks.{i}.tcn_bn.gamma", (hidden,), "gamma", 0
        yield f"blocks.{i}.tcn_bn.beta", (hidden,), "bias", 0

    yield "fc.weight", (config.feature_dim, hidden), "weight", hidden
    yield "fc.bias", (config.feature_dim,), "bias", 0

    dims = (config.feature_dim, *config.projector_dims)
    for i in range(3):
        yield f"projector.{i}.weight", (dims[i + 1], dims[i]), "weight", dims[i]
        if i < 2:
            yield f"projector.{i}_bn.gamma", (dims[i + 1],), "gamma", 0
            yield f"projector.{i}_bn.beta", (dims[i + 1],), "bias", 0
    yield "projector.2.bias", (dims[-1],), "bias", 0


def _norm_layers(config: EncoderConfig) -> Iterator[tuple[str, int]]:
    for i in range(config.num_blocks):
        yield f"blocks.{i}.gcn_bn", config.hidden_channels
        yield f"blocks.{i}.tcn_bn", config.hidden_channels
    for i in range(2):
        yield f"projector.{i}_bn", config.projector_dims[i]


@dataclass
class EncoderState:
    """
    All tensors of the encoder and projector.

    :param config: The architecture these tensors belong to.
    :param parameters: Trainable tensors by name.
    :param buffers: Batch norm running statistics by name.
    :param init: How the parameters were initialised.
    :param training: Whether batch norm uses batch statistics and updates its running statistics.
    """
    config: EncoderConfig
    parameters: dict[str, Tensor]
    buffers: dict[str, np.ndarray]
    init: dict[str, Any] = field(default_factory=dict)
    training: bool = True

    @classmethod
    def initialise(cls, config: EncoderConfig, seed: int) -> Self:
        """
        Fresh parameters. Weights are drawn from ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``,
        batch norm scales are one and every bias is zero.
        """
        rng = np.random.default_rng(seed)
        parameters: dict[str, Tensor] = {}
        for name, shape, kind, fan_in in _layer_shapes(config):
            match kind:
                case "weight":
                    bound = 1.0 / np.sqrt(fan_in)
                    values = rng.uniform(-bound, bound, size=shape)
                case "gamma":
                    values = np.ones(shape)
                case _:
                    values = np.zeros(shape)
            parameters[name] = Tensor(values, requires_grad=True, name=name)

        buffers = cls._fresh_buffers(config)
        state = cls(config=config, parameters=parameters, buffers=buffers, init={"scheme": INIT_SCHEME, "seed": seed})
        LOGGER.debug(f"Initialised encoder with {state.parameter_count} parameters from seed {seed}")
        return state

    @staticmethod
    def _fresh_buffers(config: EncoderConfig) -> dict[str, np.ndarray]:
        buffers = {}
        for name, channels in _norm_layers(config):
            buffers[f"{name}.running_mean"] = np.zeros(channels)
            buffers[f"{name}.running_var"] = np.ones(channels)
        return buffers

    @classmethod
    def expected_shapes(cls, config: EncoderConfig) -> dict[str, tuple[int, ...]]:
        """The shape of every parameter and buffer for the given architecture"""
        shapes = {name: shape for name, shape, _, _ in _layer_shapes(config)}
        shapes |= {name: buffer.shape for name, buffer in cls._fresh_buffers(config).items()}
        return shapes

    @property
    def parameter_count(self) -> int:
        return sum(param.size for param in self.parameters.values())

    def train(self) -> Self:
        self.training = True
        return self

    def eval(self) -> Self:
        self.training = False
        return self

    def zero_grad(self) -> None:
        for param in self.parameters.values():
            param.zero_grad()

    def grads(self) -> dict[str, np.ndarray | None]:
        return {name: param.grad for name, param in self.parameters.items()}

    def copy(self) -> Self:
        """An independent deep copy of this state"""
        return copy.deepcopy(self)

    def freeze(self) -> None:
        """Stop gradient accumulation into every parameter"""
        for param in self.parameters.values():
            param.requires_grad = False

    def equals(self, other: "EncoderState") -> bool:
        """Whether both states hold bitwise identical tensors"""
        if self.parameters.keys() != other.parameters.keys() or self.buffers.keys() != other.buffers.keys():
            return False
        return all(
            np.array_equal(param.values, other.parameters[name].values) for name, param in self.parameters.items()
        ) and all(np.array_equal(buffer, other.buffers[name]) for name, buffer in self.buffers.items())


###########################################################################
## Forward
###########################################################################
def _channel_affine(x: Tensor, weight: Tensor) -> Tensor:
    """Mix the channels (axis 1) of ``x`` [N, C, T, V] with ``weight`` [C_out, C]"""
    mixed = ops.batched_matmul(ops.transpose(x, (0, 2, 3, 1)), ops.transpose(weight))
    return ops.transpose(mixed, (0, 3, 1, 2))


def _linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    out = ops.matmul(x, ops.transpose(weight))
    return out if bias is None else ops.add(out, bias)


def _batch_norm(state: EncoderState, name: str, x: Tensor) -> Tensor:
    return ops.batch_norm(
        x,
        gamma=state.parameters[f"{name}.gamma"],
        beta=state.parameters[f"{name}.beta"],
        running_mean=state.buffers[f"{name}.running_mean"],
        running_var=state.buffers[f"{name}.running_var"],
        training=state.training,
    )


def encode(state: EncoderState, x: Tensor | np.ndarray, adjacency: np.ndarray) -> Tensor:
    """
    Extract features ``[N, c_h]`` from a batch of sequences.

    Every block mixes joints with the normalised ``adjacency``, mixes channels, then applies batch norm,
    a rectifier, a temporal convolution, batch norm and a rectifier.
    Features are the mean over frames and joints, mapped to ``c_h`` dimensions.

    :param state: The encoder parameters.
    :param x: Batch of shape ``[N, C, T, V]``.
    :param adjacency: Normalised adjacency ``[V, V]`` shared by the batch, or ``[N, V, V]`` per sequence.
    :raise ShapeMismatchError: When the joint counts of ``x`` and ``adjacency`` disagree.
    """
    x = ops.as_tensor(x)
    adjacency = np.asarray(adjacency, dtype=np.float64)
    if x.ndim != 4 or x.shape[1] != state.config.in_channels:
        raise ShapeMismatchError(
            f"Encoder expects input [N, {state.config.in_channels}, T, V]", x.shape
        )
    if adjacency.shape[-2:] != (x.shape[3], x.shape[3]) or adjacency.ndim not in (2, 3):
        raise ShapeMismatchError("Adjacency does not match the joint count of the input", adjacency.shape, x.shape)
    if adjacency.ndim == 3:
        if adjacency.shape[0] != x.shape[0]:
            raise ShapeMismatchError("Per-sequence adjacency does not match the batch", adjacency.shape, x.shape)
        adjacency = adjacency[:, None]
    graph = Tensor(adjacency)

    params = state.parameters
    for i in range(state.config.num_blocks):
        x = ops.batched_matmul(x, graph)
        x = _channel_affine(x, params[f"blocks.{i}.gcn.weight"])
        x = ops.relu(_batch_norm(state, f"blocks.{i}.gcn_bn", x))
        x = ops.temporal_conv1d(x, params[f"blocks.{i}.tcn.weight"])
        x = ops.relu(_batch_norm(state, f"blocks.{i}.tcn_bn", x))

    pooled = ops.mean_pool(x, axes=(2, 3))
    return _linear(pooled, params["fc.weight"], params["fc.bias"])


def project(state: EncoderState, h: Tensor) -> Tensor:
    """
    Map features ``[N, c_h]`` to embeddings ``[N, c_z]`` with 3 affine layers,
    the first two followed by batch norm and a rectifier.
    """
    if h.ndim != 2 or h.shape[1] != state.config.feature_dim:
        raise ShapeMismatchError(f"Projector expects features [N, {state.config.feature_dim}]", h.shape)

    params = state.parameters
    z = h
    for i in range(2):
        z = _linear(z, params[f"projector.{i}.weight"])
        z = ops.relu(_batch_norm(state, f"projector.{i}_bn", z))
    return _linear(z, params["projector.2.weight"], params["projector.2.bias"])
