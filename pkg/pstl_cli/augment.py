"""
The ordinary augmentations applied to every stream before masking: shear, rotation, left/right flip
and temporal crop.

All operations are pure functions of their input, config and the state of the given random generator.
"""
import math

import numpy as np

from pstl_cli.config.pipeline import AugmentConfig
from pstl_cli.exception import InvalidModalityError, InvalidInputError
from pstl_cli.skeleton.sequence import SkeletonSequence
from pstl_cli.skeleton.topology import GraphTopology


def _check_coordinates(seq: SkeletonSequence, name: str) -> None:
    if seq.num_channels != 3:
        raise InvalidModalityError(f"{name} needs 3D coordinates, got {seq.num_channels} channels")


def _apply_linear(matrix: np.ndarray, seq: SkeletonSequence) -> SkeletonSequence:
    return seq.with_data(np.einsum("ij,jtv->itv", matrix, seq.data.astype(np.float64)))


###########################################################################
## Spatial
###########################################################################
def shear_matrix(amplitude: float, rng: np.random.Generator) -> np.ndarray:
    """
    A 3x3 matrix with unit diagonal and off-diagonal factors drawn uniformly from ``[-amplitude, amplitude]``
    in the order s12, s13, s21, s23, s31, s32.
    """
    s12, s13, s21, s23, s31, s32 = rng.uniform(-amplitude, amplitude, size=6)
    return np.array([
        [1.0, s12, s13],
        [s21, 1.0, s23],
        [s31, s32, 1.0],
    ])


def shear(seq: SkeletonSequence, params: AugmentConfig, rng: np.random.Generator) -> SkeletonSequence:
    """
    Left-multiply every joint coordinate by one random shear matrix.

    :raise InvalidModalityError: When the sequence does not hold 3D coordinates.
    """
    _check_coordinates(seq, "Shear")
    return _apply_linear(shear_matrix(params.shear_amplitude, rng), seq)


def axis_rotation(axis: int, angle: float) -> np.ndarray:
    """The matrix rotating by ``angle`` radians around ``axis`` (0=X, 1=Y, 2=Z)"""
    cos, sin = math.cos(angle), math.sin(angle)
    match axis:
        case 0:
            return np.array([[1.0, 0.0, 0.0], [0.0, cos, -sin], [0.0, sin, cos]])
        case 1:
            return np.array([[cos, 0.0, sin], [0.0, 1.0, 0.0], [-sin, 0.0, cos]])
        case 2:
            return np.array([[cos, -sin, 0.0], [sin, cos, 0.0], [0.0, 0.0, 1.0]])
    raise InvalidInputError(f"Rotation axis must be 0, 1 or 2, got {axis}")


def rotation_matrix(main_max: float, minor_max: float, rng: np.random.Generator) -> np.ndarray:
    """
    Compose X, Y and Z rotations as ``Rx @ Ry @ Rz``.

    A main axis is drawn first. Its angle is drawn from ``[0, main_max]``
    and the angles of the other two axes from ``[0, minor_max]``, in X, Y, Z order.
    """
    main = int(rng.integers(3))
    angles = [rng.uniform(0.0, main_max if axis == main else minor_max) for axis in range(3)]
    return axis_rotation(0, angles[0]) @ axis_rotation(1, angles[1]) @ axis_rotation(2, angles[2])


def rotate(seq: SkeletonSequence, params: AugmentConfig, rng: np.random.Generator) -> SkeletonSequence:
    """
    Rotate every joint coordinate by one random rotation.

    :raise InvalidModalityError: When the sequence does not hold 3D coordinates.
    """
    _check_coordinates(seq, "Rotation")
    return _apply_linear(rotation_matrix(params.rotate_main_max, params.rotate_minor_max, rng), seq)


def spatial_flip(
        seq: SkeletonSequence, topology: GraphTopology, params: AugmentConfig, rng: np.random.Generator
) -> SkeletonSequence:
    """With probability ``params.flip_probability``, swap the left and right joints of the body"""
    if rng.random() < params.flip_probability:
        return seq.with_data(seq.data[:, :, list(topology.flip_permutation)])
    return seq


###########################################################################
## Temporal
###########################################################################
def crop_padding(frames: int, ratio: float) -> int:
    """The number of frames padded before cropping: ``ceil(ratio * frames)``"""
    return math.ceil(ratio * frames - 1e-9)


def temporal_crop(seq: SkeletonSequence, params: AugmentConfig, rng: np.random.Generator) -> SkeletonSequence:
    """
    Reflection pad ``ceil(γT)`` frames, half at the start and the rest at the end,
    then crop a uniformly random window of the original length.

    :raise InvalidInputError: When the sequence has fewer than 2 frames.
    """
    frames = seq.num_frames
    if frames < 2:
        raise InvalidInputError(f"Temporal crop needs at least 2 frames, got {frames}")

    pad = crop_padding(frames, params.crop_pad_ratio)
    if pad == 0:
        return seq

    left = pad // 2
    padded = np.pad(seq.data, ((0, 0), (left, pad - left), (0, 0)), mode="reflect")
    start = int(rng.integers(0, pad + 1))
    return seq.with_data(padded[:, start:start + frames])


###########################################################################
## Composition
###########################################################################
def ordinary_augment(
        seq: SkeletonSequence,
        topology: GraphTopology,
        params: AugmentConfig,
        rng: np.random.Generator,
        spatial: bool = True,
) -> SkeletonSequence:
    """
    Apply shear, rotation, flip and temporal crop in that order.

    :param spatial: Apply shear and rotation. Disable for streams without coordinate semantics.
    """
    if spatial:
        seq = shear(seq, params, rng)
        seq = rotate(seq, params, rng)
    seq = spatial_flip(seq, topology, params, rng)
    return temporal_crop(seq, params, rng)
