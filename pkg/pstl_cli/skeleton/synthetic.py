"""
Synthetic action datasets: every class is a parametric oscillation of a set of body parts.
"""
import logging
import math

import numpy as np

from pstl_cli.config.pipeline import DataConfig
from pstl_cli.skeleton.dataset import Dataset, Split
from pstl_cli.skeleton.sequence import SkeletonSequence, resize_temporal
from pstl_cli.skeleton.topology import GraphTopology, LAYOUTS, BODY_PARTS

LOGGER = logging.getLogger(__name__)

#: Direction every bone of a body part points in, at rest.
PART_DIRECTIONS: dict[str, tuple[float, float, float]] = {
    "torso": (0.0, 1.0, 0.0),
    "left_arm": (1.0, -0.2, 0.0),
    "right_arm": (-1.0, -0.2, 0.0),
    "left_leg": (0.15, -1.0, 0.0),
    "right_leg": (-0.15, -1.0, 0.0),
}
BONE_LENGTH = 0.25

#: Body part groups driven by each class, symmetric under left/right flips.
CLASS_PART_GROUPS: tuple[tuple[str, ...], ...] = (
    ("left_arm", "right_arm"),
    ("left_leg", "right_leg"),
    ("left_arm", "right_arm", "left_leg", "right_leg"),
    ("torso", "left_arm", "right_arm"),
)


def rest_pose(topology: GraphTopology) -> tuple[np.ndarray, np.ndarray]:
    """
    Joint coordinates of a standing body and the depth of every joint below the root.

    :return: Coordinates ``[3, V]`` and depths ``[V]``.
    """
    parents = topology.parents
    position = np.zeros((3, topology.num_joints))
    depth = np.zeros(topology.num_joints, dtype=np.int64)

    # parents precede children in breadth-first order from the root
    order = sorted(range(topology.num_joints), key=lambda joint: _depth(parents, joint))
    for joint in order:
        parent = parents[joint]
        if parent == joint:
            continue
        direction = np.array(PART_DIRECTIONS[BODY_PARTS[topology.part_assignment[joint]]])
        position[:, joint] = position[:, parent] + BONE_LENGTH * direction / np.linalg.norm(direction)
        depth[joint] = depth[parent] + 1

    return position, depth


def _depth(parents: tuple[int, ...], joint: int) -> int:
    depth = 0
    while parents[joint] != joint:
        joint = parents[joint]
        depth += 1
    return depth


def _class_motion(label: int) -> tuple[tuple[str, ...], float, int]:
    """Parts, frequency in cycles per clip and axis of the oscillation for the class ``label``"""
    parts = CLASS_PART_GROUPS[label % len(CLASS_PART_GROUPS)]
    frequency = 1.0 + 0.5 * label
    axis = label % 3
    return parts, frequency, axis


def _generate_sequence(
        topology: GraphTopology,
        pose: np.ndarray,
        depth: np.ndarray,
        label: int,
        frames: int,
        noise: float,
        rng: np.random.Generator,
) -> np.ndarray:
    parts, frequency, axis = _class_motion(label)
    part_ids = {BODY_PARTS.index(part) for part in parts}
    active = np.array([part in part_ids for part in topology.part_assignment], dtype=np.float64)
    weight = active * (0.5 + 0.5 * depth / max(int(depth.max()), 1))

    phase = rng.uniform(0, 2 * math.pi)
    amplitude = 0.3 * rng.uniform(0.8, 1.2)
    translation = rng.normal(0.0, 0.1, size=3)

    time = np.linspace(0.0, 1.0, frames)
    wave = amplitude * np.sin(2 * math.pi * frequency * time + phase)

    data = np.repeat(pose[:, None, :], frames, axis=1) + translation[:, None, None]
    data[axis] += wave[:, None] * weight[None, :]
    if noise:
        data += rng.normal(0.0, noise, size=data.shape)
    return data


def generate_synthetic(config: DataConfig, seed: int) -> Dataset:
    """
    Generate a labelled dataset where every class oscillates its own body parts at its own frequency.

    Every sequence draws its own native length, phase, amplitude, translation and noise,
    and is then resized to ``config.frames`` frames. The same ``seed`` always gives the same dataset.
    """
    rng = np.random.default_rng(seed)
    topology = LAYOUTS[config.layout]()
    pose, depth = rest_pose(topology)

    sequences: list[SkeletonSequence] = []
    split: list[Split] = []
    num_test = max(1, round(config.test_fraction * config.sequences_per_class))
    num_test = min(num_test, config.sequences_per_class - 1) if config.sequences_per_class > 1 else 0

    for label in range(config.num_classes):
        test_members = set(rng.permutation(config.sequences_per_class)[:num_test].tolist())
        for i in range(config.sequences_per_class):
            native_frames = int(rng.integers(max(2, int(0.8 * config.frames)), int(1.2 * config.frames) + 1))
            data = _generate_sequence(topology, pose, depth, label, native_frames, config.noise, rng)

            seq = SkeletonSequence(data=data.astype(np.float32), label=label, subject_id=i % 10)
            sequences.append(resize_temporal(seq, config.frames))
            split.append(Split.TEST if i in test_members else Split.TRAIN)

    LOGGER.debug(
        f"Generated {len(sequences)} sequences: {config.num_classes} classes, "
        f"{topology.num_joints} joints, {config.frames} frames"
    )
    return Dataset(sequences=sequences, topology=topology, split=split, num_classes=config.num_classes)
