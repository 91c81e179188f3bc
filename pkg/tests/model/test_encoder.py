import numpy as np
import pytest

from pstl_cli.config.pipeline import EncoderConfig
from pstl_cli.exception import ShapeMismatchError
from pstl_cli.masking import sample_spatial_mask, uniform_probabilities, restrict_topology, apply_spatial_mask
from pstl_cli.model import EncoderState, normalize_adjacency, encode, project
from pstl_cli.numerics import Tensor, no_grad
from pstl_cli.skeleton import GraphTopology
from tests.utils import path_graph, random_tree, random_sequence

SMALL = EncoderConfig(hidden_channels=4, num_blocks=2, temporal_kernel_size=3, feature_dim=6, projector_dims=(8, 8, 5))


def test_normalize_adjacency():
    adjacency = normalize_adjacency(path_graph(4))
    degrees = np.array([2, 3, 3, 2])

    assert np.allclose(adjacency, adjacency.T)
    assert adjacency[0, 1] == pytest.approx(1 / np.sqrt(degrees[0] * degrees[1]))
    assert adjacency[1, 1] == pytest.approx(1 / 3)
    assert adjacency[0, 2] == 0


class TestEncoderState:

    @pytest.fixture
    def state(self) -> EncoderState:
        return EncoderState.initialise(SMALL, seed=0)

    def test_initialise(self, state: EncoderState):
        shapes = EncoderState.expected_shapes(SMALL)
        assert {name: param.shape for name, param in state.parameters.items()} | \
               {name: buffer.shape for name, buffer in state.buffers.items()} == shapes
        assert state.parameters["projector.2.weight"].shape == (5, 8)
        assert state.parameters["blocks.0.gcn.weight"].shape == (4, 3)
        assert state.parameters["blocks.1.tcn.weight"].shape == (4, 4, 3)

        bound = 1 / np.sqrt(3)
        assert np.all(np.abs(state.parameters["blocks.0.gcn.weight"].values) <= bound)
        assert np.all(state.parameters["blocks.0.gcn_bn.gamma"].values == 1)
        assert np.all(state.parameters["fc.bias"].values == 0)
        assert all(param.requires_grad for param in state.parameters.values())
        assert state.init == {"scheme": "fan_in_uniform", "seed": 0}
        assert state.parameter_count == sum(int(np.prod(shape)) for name, shape in shapes.items()
                                            if name in state.parameters)

    def test_same_seed_gives_same_state(self, state: EncoderState):
        assert state.equals(EncoderState.initialise(SMALL, seed=0))
        assert not state.equals(EncoderState.initialise(SMALL, seed=1))
        assert not state.equals(EncoderState.initialise(SMALL.model_copy(update={"feature_dim": 7}), seed=0))

    def test_copy_is_independent(self, state: EncoderState):
        copy = state.copy()
        assert copy.equals(state)

        copy.parameters["fc.bias"].values += 1
        copy.buffers["blocks.0.gcn_bn.running_mean"] += 1
        assert not copy.equals(state)
        assert np.all(state.parameters["fc.bias"].values == 0)

    def test_modes_and_freeze(self, state: EncoderState):
        assert state.training
        assert state.eval() is state
        assert not state.training
        assert state.train().training

        state.freeze()
        assert not any(param.requires_grad for param in state.parameters.values())


class TestEncode:

    @pytest.fixture
    def state(self) -> EncoderState:
        return EncoderState.initialise(SMALL, seed=3)

    def test_output_shapes(self, state: EncoderState, topology: GraphTopology, rng: np.random.Generator):
        x = rng.normal(size=(4, 3, 9, topology.num_joints))
        h = encode(state, x, normalize_adjacency(topology))
        assert h.shape == (4, SMALL.feature_dim)
        assert project(state, h).shape == (4, SMALL.embedding_dim)

    def test_training_updates_running_statistics(self, state: EncoderState, topology: GraphTopology,
                                                 rng: np.random.Generator):
        x = rng.normal(size=(4, 3, 9, topology.num_joints))
        before = state.copy()
        encode(state, x, normalize_adjacency(topology))
        assert not np.array_equal(state.buffers["blocks.0.gcn_bn.running_mean"],
                                  before.buffers["blocks.0.gcn_bn.running_mean"])

        state.eval()
        after = state.copy()
        with no_grad():
            encode(state, x, normalize_adjacency(topology))
        assert state.equals(after)

    def test_any_joint_and_frame_count(self, state: EncoderState, rng: np.random.Generator):
        state.eval()
        for num_joints, frames in ((4, 5), (10, 12), (2, 3)):
            topology = path_graph(num_joints)
            h = encode(state, rng.normal(size=(1, 3, frames, num_joints)), normalize_adjacency(topology))
            assert h.shape == (1, SMALL.feature_dim)

    def test_per_sequence_adjacency(self, state: EncoderState, topology: GraphTopology, rng: np.random.Generator):
        state.eval()
        x = rng.normal(size=(3, 3, 6, topology.num_joints))
        graphs = [normalize_adjacency(random_tree(rng, topology.num_joints)) for _ in range(3)]

        batched = encode(state, x, np.stack(graphs))
        for i, graph in enumerate(graphs):
            single = encode(state, x[i:i + 1], graph)
            assert np.allclose(batched.values[i], single.values[0], rtol=0, atol=1e-12)

    def test_joint_relabelling_leaves_features_unchanged(self, state: EncoderState, rng: np.random.Generator):
        state.eval()
        for _ in range(20):
            topology = random_tree(rng, int(rng.integers(4, 12)))
            adjacency = normalize_adjacency(topology)
            x = rng.normal(size=(2, 3, 5, topology.num_joints))
            order = rng.permutation(topology.num_joints)

            with no_grad():
                original = encode(state, x, adjacency)
                relabelled = encode(state, x[..., order], adjacency[np.ix_(order, order)])
            np.testing.assert_allclose(relabelled.values, original.values, rtol=0, atol=1e-10)

    def test_masked_joints_never_reach_the_encoding(self, state: EncoderState):
        state.eval()
        rng = np.random.default_rng(21)
        for _ in range(1000):
            topology = random_tree(rng, int(rng.integers(6, 10)))
            n_mask = int(rng.integers(1, topology.num_joints - 1))
            plan = sample_spatial_mask(uniform_probabilities(topology.num_joints), n_mask, rng)
            restricted, _ = restrict_topology(topology, plan.masked_joints)
            adjacency = normalize_adjacency(restricted)

            seq = random_sequence(rng, topology.num_joints, frames=4)
            perturbed_data = seq.data.copy()
            perturbed_data[:, :, list(plan.masked_joints)] = rng.normal(scale=100, size=(3, 4, n_mask))
            perturbed = seq.with_data(perturbed_data)

            with no_grad():
                original = encode(state, apply_spatial_mask(seq, plan.masked_joints).data[None], adjacency)
                changed = encode(state, apply_spatial_mask(perturbed, plan.masked_joints).data[None], adjacency)
            assert np.array_equal(original.values, changed.values)

    def test_invalid_input_fails(self, state: EncoderState, topology: GraphTopology, rng: np.random.Generator):
        adjacency = normalize_adjacency(topology)
        with pytest.raises(ShapeMismatchError):
            encode(state, rng.normal(size=(2, 2, 5, topology.num_joints)), adjacency)
        with pytest.raises(ShapeMismatchError):
            encode(state, rng.normal(size=(2, 3, 5, topology.num_joints - 1)), adjacency)
        with pytest.raises(ShapeMismatchError):
            encode(state, rng.normal(size=(2, 3, 5, topology.num_joints)), np.stack([adjacency] * 3))
        with pytest.raises(ShapeMismatchError):
            project(state, Tensor(np.ones((2, SMALL.feature_dim + 1))))

    def test_gradients_reach_every_parameter(self, state: EncoderState, topology: GraphTopology,
                                             rng: np.random.Generator):
        from pstl_cli.numerics import ops

        x = rng.normal(size=(4, 3, 6, topology.num_joints))
        z = project(state, encode(state, x, normalize_adjacency(topology)))
        ops.sum(ops.mul(z, z)).backward()
        assert all(param.grad is not None for param in state.parameters.values())
