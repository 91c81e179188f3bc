"""
Spatial masking: joints are removed from both the sequence and the skeleton graph,
so masked joints never take part in encoding.
"""
from collections.abc import Collection
from dataclasses import dataclass

import numpy as np

from pstl_cli.config.pipeline import SpatialStrategy
from pstl_cli.exception import InvalidTopologyError, InvalidInputError
from pstl_cli.skeleton.sequence import SkeletonSequence
from pstl_cli.skeleton.topology import GraphTopology, degree_vector


@dataclass(frozen=True)
class SpatialMaskPlan:
    """
    The joints removed from one sequence.

    :param masked_joints: Removed joint indices in ascending order.
    :param probabilities: The per-joint probabilities the joints were drawn with.
    """
    masked_joints: tuple[int, ...]
    probabilities: np.ndarray

    @property
    def num_joints(self) -> int:
        return len(self.probabilities)

    @property
    def kept_joints(self) -> tuple[int, ...]:
        return kept_joints(self.num_joints, self.masked_joints)


def degree_probabilities(degrees: np.ndarray) -> np.ndarray:
    """
    Normalise per-joint ``degrees`` to probabilities. Only the ratios between degrees matter.

    :raise InvalidTopologyError: When any degree is zero or negative.
    """
    degrees = np.asarray(degrees, dtype=np.float64)
    if np.any(degrees <= 0):
        isolated = np.flatnonzero(degrees <= 0).tolist()
        raise InvalidTopologyError(f"Degree weighted masking is undefined for isolated joints: {isolated}")
    return degrees / degrees.sum()


def csm_probabilities(topology: GraphTopology) -> np.ndarray:
    """
    Masking probability of every joint, proportional to its degree.

    :raise InvalidTopologyError: When any joint has no edges.
    """
    return degree_probabilities(degree_vector(topology))


def uniform_probabilities(num_joints: int) -> np.ndarray:
    """Equal masking probability for every joint"""
    return np.full(num_joints, 1.0 / num_joints)


def mask_probabilities(topology: GraphTopology, strategy: SpatialStrategy | str) -> np.ndarray:
    """Masking probabilities of every joint for the given ``strategy``"""
    match SpatialStrategy(strategy):
        case SpatialStrategy.CENTRAL:
            return csm_probabilities(topology)
        case SpatialStrategy.RANDOM:
            return uniform_probabilities(topology.num_joints)


def sample_spatial_mask(probabilities: np.ndarray, n_mask: int, rng: np.random.Generator) -> SpatialMaskPlan:
    """
    Draw ``n_mask`` joints without replacement.

    Each draw picks one of the remaining joints with probability proportional to its weight,
    using one uniform number from ``rng``, and removes it before the next draw.

    :raise InvalidInputError: When ``n_mask`` would leave fewer than 2 joints.
    """
    probabilities = np.asarray(probabilities, dtype=np.float64)
    num_joints = len(probabilities)
    if not 0 <= n_mask <= num_joints - 2:
        raise InvalidInputError(f"Number of masked joints must lie in [0, {num_joints - 2}], got {n_mask}")

    weights = probabilities.copy()
    masked = []
    for _ in range(n_mask):
        cumulative = np.cumsum(weights)
        target = rng.random() * cumulative[-1]
        joint = min(int(np.searchsorted(cumulative, target, side="right")), num_joints - 1)
        masked.append(joint)
        weights[joint] = 0.0

    return SpatialMaskPlan(masked_joints=tuple(sorted(masked)), probabilities=probabilities)


def sample_part_mask(topology: GraphTopology, n_parts: int, rng: np.random.Generator) -> SpatialMaskPlan:
    """
    Mask every joint of ``n_parts`` distinct, uniformly drawn body parts of those present in ``topology``.

    :raise InvalidInputError: When ``n_parts`` would leave no body part.
    """
    present = topology.parts_present
    if not 0 <= n_parts <= len(present) - 1:
        raise InvalidInputError(f"Number of masked parts must lie in [0, {len(present) - 1}], got {n_parts}")

    parts = rng.choice(present, size=n_parts, replace=False) if n_parts else ()
    masked = topology.joints_of_parts(int(part) for part in parts)
    return SpatialMaskPlan(masked_joints=tuple(sorted(masked)), probabilities=uniform_probabilities(topology.num_joints))


###########################################################################
## Restriction
###########################################################################
def kept_joints(num_joints: int, masked_joints: Collection[int]) -> tuple[int, ...]:
    """
    The joints remaining after masking, in ascending order.

    :raise InvalidInputError: When a masked joint is out of range or every joint is masked.
    """
    masked = set(masked_joints)
    if any(not 0 <= joint < num_joints for joint in masked):
        raise InvalidInputError(f"Masked joints must lie in [0, {num_joints})")
    kept = tuple(joint for joint in range(num_joints) if joint not in masked)
    if not kept:
        raise InvalidInputError("Every joint is masked")
    return kept


def restrict_topology(
        topology: GraphTopology, masked_joints: Collection[int]
) -> tuple[GraphTopology, dict[int, int]]:
    """
    The subgraph induced by the unmasked joints.

    Joints whose left/right partner is masked flip onto themselves.
    The restricted graph may be disconnected.

    :return: The restricted topology and the map of old to new joint indices.
    """
    kept = kept_joints(topology.num_joints, masked_joints)
    remap = {old: new for new, old in enumerate(kept)}

    edges = tuple((remap[a], remap[b]) for a, b in topology.edges if a in remap and b in remap)
    flip = tuple(remap.get(topology.flip_permutation[old], new) for new, old in enumerate(kept))
    parts = tuple(topology.part_assignment[old] for old in kept)
    root = remap.get(topology.root, 0)

    restricted = GraphTopology(
        num_joints=len(kept), edges=edges, flip_permutation=flip, part_assignment=parts, root=root, induced=True
    )
    return restricted, remap


def apply_spatial_mask(seq: SkeletonSequence, masked_joints: Collection[int]) -> SkeletonSequence:
    """Remove the ``masked_joints`` from the joint axis of ``seq``"""
    kept = kept_joints(seq.num_joints, masked_joints)
    if len(kept) == seq.num_joints:
        return seq
    return seq.with_data(seq.data[:, :, list(kept)])
