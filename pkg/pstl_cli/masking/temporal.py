"""
Temporal masking: the frames with the most motion, plus as many random frames, are removed from a sequence.
"""
from dataclasses import dataclass

import numpy as np

from pstl_cli.config.pipeline import TemporalStrategy
from pstl_cli.exception import InvalidInputError
from pstl_cli.skeleton.sequence import SkeletonSequence


@dataclass(frozen=True)
class TemporalMaskPlan:
    """
    The frames removed from one sequence.

    :param key_frames: The K frames with the largest motion attention, ascending.
    :param random_frames: Frames drawn uniformly from the rest, ascending.
    :param attention: Motion attention of every frame transition.
    :param degenerate: Whether the sequence had no motion and attention fell back to uniform.
    """
    key_frames: tuple[int, ...]
    random_frames: tuple[int, ...]
    attention: np.ndarray
    degenerate: bool = False

    @property
    def masked_frames(self) -> tuple[int, ...]:
        """All masked frames in ascending order"""
        return tuple(sorted(self.key_frames + self.random_frames))


def motion_energy(seq: SkeletonSequence) -> np.ndarray:
    """Sum over channels and joints of the squared displacement of every frame transition"""
    if seq.num_frames < 2:
        raise InvalidInputError(f"Motion needs at least 2 frames, got {seq.num_frames}")
    data = seq.data.astype(np.float64)
    displacement = data[:, 1:] - data[:, :-1]
    return np.einsum("ctv,ctv->t", displacement, displacement)


def motion_attention(seq: SkeletonSequence) -> np.ndarray:
    """
    Share of the total motion energy of every frame transition.
    Static sequences get uniform attention.
    """
    energy = motion_energy(seq)
    total = energy.sum()
    if total <= 0:
        return np.full(len(energy), 1.0 / len(energy))
    return energy / total


def sample_temporal_mask(
        seq: SkeletonSequence,
        top_k: int,
        rng: np.random.Generator,
        strategy: TemporalStrategy | str = TemporalStrategy.MOTION,
) -> TemporalMaskPlan:
    """
    Plan the removal of ``2 * top_k`` frames.

    With the 'motion' strategy, the ``top_k`` frames with the largest attention are taken first,
    ties going to the lowest index, then ``top_k`` more are drawn uniformly without replacement from the rest.
    With the 'random' strategy, all ``2 * top_k`` frames are drawn uniformly.

    :raise InvalidInputError: When fewer than 2 frames would remain.
    """
    frames = seq.num_frames
    if top_k < 0 or 2 * top_k > frames - 2:
        raise InvalidInputError(f"Cannot mask 2 * {top_k} frames and keep 2 of {frames}")

    energy = motion_energy(seq)
    degenerate = bool(energy.sum() <= 0)
    attention = motion_attention(seq)
    if top_k == 0:
        return TemporalMaskPlan(key_frames=(), random_frames=(), attention=attention, degenerate=degenerate)

    if TemporalStrategy(strategy) == TemporalStrategy.RANDOM:
        drawn = rng.choice(frames, size=2 * top_k, replace=False)
        return TemporalMaskPlan(
            key_frames=(), random_frames=tuple(sorted(drawn.tolist())), attention=attention, degenerate=degenerate
        )

    key_frames = np.argsort(-attention, kind="stable")[:top_k]
    remaining = np.setdiff1d(np.arange(frames), key_frames)
    random_frames = rng.choice(remaining, size=top_k, replace=False)

    return TemporalMaskPlan(
        key_frames=tuple(sorted(key_frames.tolist())),
        random_frames=tuple(sorted(random_frames.tolist())),
        attention=attention,
        degenerate=degenerate,
    )


def apply_temporal_mask(seq: SkeletonSequence, plan: TemporalMaskPlan) -> SkeletonSequence:
    """Remove the planned frames from ``seq``, keeping the order of the rest"""
    masked = set(plan.masked_frames)
    if not masked:
        return seq
    if any(not 0 <= frame < seq.num_frames for frame in masked):
        raise InvalidInputError(f"Masked frames must lie in [0, {seq.num_frames})")
    kept = [frame for frame in range(seq.num_frames) if frame not in masked]
    return seq.with_data(seq.data[:, kept])
