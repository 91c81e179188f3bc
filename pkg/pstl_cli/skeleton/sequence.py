"""
Skeleton sequences and the joint/motion/bone modality streams derived from them.
"""
from dataclasses import dataclass, replace
from enum import StrEnum
from typing import Self

import numpy as np

from pstl_cli.exception import InvalidInputError, NumericFaultError
from pstl_cli.skeleton.topology import GraphTopology


class Modality(StrEnum):
    """The input streams an encoder can be trained on."""
    JOINT = "J"
    MOTION = "M"
    BONE = "B"


@dataclass(frozen=True)
class SkeletonSequence:
    """
    A single action clip.

    :param data: Array of shape ``[C, T, V]``: channels, frames, joints.
    :param label: The action category id.
    :param subject_id: The performer of the action.
    """
    data: np.ndarray
    label: int = 0
    subject_id: int = 0

    def __post_init__(self):
        if self.data.ndim != 3:
            raise InvalidInputError(f"Skeleton data must have 3 axes [C, T, V], got shape {self.data.shape}")
        channels, frames, joints = self.data.shape
        if channels < 1 or frames < 1 or joints < 1:
            raise InvalidInputError(f"Skeleton data has an empty axis: {self.data.shape}")
        if self.label < 0:
            raise InvalidInputError(f"Class labels must be non-negative, got {self.label}")
        if not np.all(np.isfinite(self.data)):
            raise NumericFaultError("Skeleton data contains non-finite values")

    @property
    def num_channels(self) -> int:
        return self.data.shape[0]

    @property
    def num_frames(self) -> int:
        return self.data.shape[1]

    @property
    def num_joints(self) -> int:
        return self.data.shape[2]

    def with_data(self, data: np.ndarray) -> Self:
        """Copy of this sequence holding new ``data`` with the same label and subject"""
        return replace(self, data=data)


def to_motion_stream(seq: SkeletonSequence, pad: bool = False) -> SkeletonSequence:
    """
    Temporal displacement between consecutive frames.

    :param seq: Sequence with at least 2 frames.
    :param pad: Append a trailing zero frame so the output keeps the input's frame count.
        The motion modality is always built padded so all modalities share one shape.
    """
    if seq.num_frames < 2:
        raise InvalidInputError(f"Motion needs at least 2 frames, got {seq.num_frames}")

    motion = seq.data[:, 1:] - seq.data[:, :-1]
    if pad:
        motion = np.concatenate([motion, np.zeros_like(seq.data[:, :1])], axis=1)
    return seq.with_data(motion)


def to_bone_stream(seq: SkeletonSequence, topology: GraphTopology) -> SkeletonSequence:
    """
    Child-minus-parent vectors along the breadth-first spanning tree of ``topology``. The root bone is zero.

    :raise InvalidTopologyError: When the topology has no spanning tree.
    """
    if seq.num_joints != topology.num_joints:
        raise InvalidInputError(
            f"Sequence has {seq.num_joints} joints but the topology has {topology.num_joints}"
        )

    parents = np.asarray(topology.parents)
    return seq.with_data(seq.data - seq.data[:, :, parents])


def resize_temporal(seq: SkeletonSequence, target_frames: int) -> SkeletonSequence:
    """
    Linear interpolation along the frame axis to exactly ``target_frames`` frames. Endpoints are kept exactly.
    """
    if target_frames < 2:
        raise InvalidInputError(f"Target frame count must be at least 2, got {target_frames}")
    frames = seq.num_frames
    if frames == target_frames:
        return seq
    if frames == 1:
        return seq.with_data(np.repeat(seq.data, target_frames, axis=1))

    positions = np.arange(target_frames) * (frames - 1) / (target_frames - 1)
    lower = np.clip(np.floor(positions).astype(np.int64), 0, frames - 1)
    upper = np.minimum(lower + 1, frames - 1)
    fraction = (positions - lower)[None, :, None]

    data = seq.data.astype(np.float64)
    resized = data[:, lower] + fraction * (data[:, upper] - data[:, lower])
    return seq.with_data(resized.astype(seq.data.dtype))


def to_modality(seq: SkeletonSequence, topology: GraphTopology, modality: Modality | str) -> SkeletonSequence:
    """Build the given ``modality`` stream for ``seq``, keeping its shape"""
    match Modality(modality):
        case Modality.JOINT:
            return seq
        case Modality.MOTION:
            return to_motion_stream(seq, pad=True)
        case Modality.BONE:
            return to_bone_stream(seq, topology)
