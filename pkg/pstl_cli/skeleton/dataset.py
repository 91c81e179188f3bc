"""
A labelled collection of skeleton sequences and its on-disk format.

A dataset is stored as a YAML manifest plus a binary payload of little-endian 32-bit floats
laid out sequence-major, then C, T, V.
"""
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from pstl_cli.exception import MalformedHeaderError, ShapeMismatchError, NonFiniteValueError, MissingInputError, \
    InvalidInputError, InvalidTopologyError
from pstl_cli.skeleton.sequence import SkeletonSequence, Modality, to_modality, resize_temporal
from pstl_cli.skeleton.topology import GraphTopology
from pstl_cli.utils import replace_file

FORMAT_NAME = "pstl-dataset"
FORMAT_VERSION = 1
PAYLOAD_DTYPE = np.dtype("<f4")

MANIFEST_KEYS = (
    "format", "version", "payload", "num_sequences", "C", "T", "V", "num_classes",
    "labels", "subjects", "split", "topology",
)

LOGGER = logging.getLogger(__name__)


class Split(StrEnum):
    TRAIN = "train"
    TEST = "test"


@dataclass
class Dataset:
    """
    Sequences sharing channel count, joint count and topology.

    :param sequences: The sequences in this dataset.
    :param topology: The skeleton graph of every sequence.
    :param split: Train/test assignment per sequence.
    :param num_classes: The number of action categories. Inferred from labels when not given.
    """
    sequences: list[SkeletonSequence]
    topology: GraphTopology
    split: list[Split]
    num_classes: int = field(default=0)

    def __post_init__(self):
        self.split = [Split(value) for value in self.split]
        if len(self.split) != len(self.sequences):
            raise ShapeMismatchError("Split does not match the number of sequences", (len(self.split),),
                                     (len(self.sequences),))
        if not self.num_classes:
            self.num_classes = max((seq.label for seq in self.sequences), default=-1) + 1

        shapes = {(seq.num_channels, seq.num_joints) for seq in self.sequences}
        if len(shapes) > 1:
            raise ShapeMismatchError("Sequences do not share channel and joint counts", *sorted(shapes))
        if self.sequences and self.sequences[0].num_joints != self.topology.num_joints:
            raise ShapeMismatchError(
                "Sequences and topology disagree on the joint count",
                (self.sequences[0].num_joints,), (self.topology.num_joints,)
            )
        if any(not 0 <= seq.label < self.num_classes for seq in self.sequences):
            raise InvalidInputError(f"Labels must lie in [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.sequences)

    @property
    def num_frames(self) -> int | None:
        """The shared frame count, or None when frame counts differ"""
        frames = {seq.num_frames for seq in self.sequences}
        return frames.pop() if len(frames) == 1 else None

    def indices(self, split: Split | str) -> list[int]:
        """Indices of all sequences in the given ``split``"""
        split = Split(split)
        return [i for i, value in enumerate(self.split) if value == split]

    def subset(self, split: Split | str) -> list[SkeletonSequence]:
        """All sequences in the given ``split``"""
        return [self.sequences[i] for i in self.indices(split)]

    @property
    def labels(self) -> np.ndarray:
        return np.array([seq.label for seq in self.sequences], dtype=np.int64)

    def resized(self, target_frames: int) -> "Dataset":
        """Copy of this dataset with every sequence resized to ``target_frames``"""
        sequences = [resize_temporal(seq, target_frames) for seq in self.sequences]
        return Dataset(sequences=sequences, topology=self.topology, split=self.split, num_classes=self.num_classes)

    def arrays(self, split: Split | str, modality: Modality | str = Modality.JOINT) -> tuple[np.ndarray, np.ndarray]:
        """
        Stack the ``split`` into a float64 array ``[N, C, T, V]`` of the given ``modality`` and its labels.

        :raise ShapeMismatchError: When frame counts differ across sequences.
        """
        sequences = self.subset(split)
        if self.num_frames is None:
            raise ShapeMismatchError("Sequences must share a frame count before stacking; resize them first")

        data = np.stack([to_modality(seq, self.topology, modality).data for seq in sequences]).astype(np.float64)
        labels = np.array([seq.label for seq in sequences], dtype=np.int64)
        return data, labels


###########################################################################
## I/O
###########################################################################
def save_dataset(dataset: Dataset, path: str | Path) -> Path:
    """
    Save a ``dataset`` as a manifest at ``path`` and a payload file next to it.

    :return: The path to the manifest.
    """
    path = Path(path)
    if path.suffix.casefold() not in (".yml", ".yaml"):
        path = path.joinpath("manifest.yml")
    path.parent.mkdir(parents=True, exist_ok=True)
    payload_path = path.with_suffix(".bin")

    frames = dataset.num_frames
    if frames is None:
        raise ShapeMismatchError("Only datasets with a uniform frame count can be saved")

    first = dataset.sequences[0] if dataset.sequences else None
    manifest = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "payload": payload_path.name,
        "num_sequences": len(dataset),
        "C": first.num_channels if first else 0,
        "T": frames,
        "V": dataset.topology.num_joints,
        "num_classes": dataset.num_classes,
        "labels": [int(seq.label) for seq in dataset.sequences],
        "subjects": [int(seq.subject_id) for seq in dataset.sequences],
        "split": [str(value) for value in dataset.split],
        "topology": dataset.topology.as_dict(),
    }

    payload = np.stack([seq.data for seq in dataset.sequences]).astype(PAYLOAD_DTYPE) if first else np.empty(0)
    replace_file(payload_path, payload.astype(PAYLOAD_DTYPE).tobytes(order="C"))
    replace_file(path, yaml.safe_dump(manifest, default_flow_style=None, sort_keys=False))

    LOGGER.debug(f"Saved dataset of {len(dataset)} sequences to {path}")
    return path


def _require(manifest: dict[str, Any], key: str, kind: type) -> Any:
    if key not in manifest:
        raise MalformedHeaderError(f"Dataset manifest is missing key '{key}'")
    value = manifest[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise MalformedHeaderError(f"Dataset manifest key '{key}' must be an integer, got {value!r}")
    if kind is list and not isinstance(value, list):
        raise MalformedHeaderError(f"Dataset manifest key '{key}' must be a list, got {type(value).__name__}")
    if kind is dict and not isinstance(value, dict):
        raise MalformedHeaderError(f"Dataset manifest key '{key}' must be a mapping, got {type(value).__name__}")
    return value


def _read_manifest(path: Path) -> dict[str, Any]:
    try:
        with path.open("r", encoding="utf-8") as file:
            manifest = yaml.safe_load(file)
    except yaml.YAMLError as ex:
        raise MalformedHeaderError(f"Could not parse dataset manifest at {path}: {ex}") from ex

    if not isinstance(manifest, dict) or manifest.get("format") != FORMAT_NAME:
        raise MalformedHeaderError(f"File at {path} is not a {FORMAT_NAME} manifest")
    if manifest.get("version") != FORMAT_VERSION:
        raise MalformedHeaderError(f"Unsupported dataset format version: {manifest.get('version')!r}")

    unknown = set(manifest) - set(MANIFEST_KEYS)
    if unknown:
        raise MalformedHeaderError(f"Unknown dataset manifest keys: {sorted(unknown)}")
    return manifest


def load_dataset(manifest_path: str | Path) -> Dataset:
    """
    Load a dataset from its manifest.

    :raise MissingInputError: When the manifest or payload file does not exist.
    :raise MalformedHeaderError: When the manifest is unreadable or incomplete.
    :raise ShapeMismatchError: When the payload size or arrays disagree with the declared shape.
    :raise NonFiniteValueError: When the payload holds NaN or infinite values.
    """
    path = Path(manifest_path)
    if path.is_dir():
        path = path.joinpath("manifest.yml")
    if not path.is_file():
        raise MissingInputError(f"No dataset manifest found at {path}")

    manifest = _read_manifest(path)
    num_sequences = _require(manifest, "num_sequences", int)
    channels = _require(manifest, "C", int)
    frames = _require(manifest, "T", int)
    joints = _require(manifest, "V", int)
    num_classes = _require(manifest, "num_classes", int)
    labels = _require(manifest, "labels", list)
    subjects = _require(manifest, "subjects", list)
    split = _require(manifest, "split", list)
    topology_map = _require(manifest, "topology", dict)
    payload_name = _require(manifest, "payload", str)

    for key, values in (("labels", labels), ("subjects", subjects), ("split", split)):
        if len(values) != num_sequences:
            raise ShapeMismatchError(f"Manifest '{key}' length disagrees with num_sequences",
                                     (len(values),), (num_sequences,))

    try:
        topology = GraphTopology(**topology_map)
    except TypeError as ex:
        raise MalformedHeaderError(f"Invalid topology in dataset manifest: {ex}") from ex
    if topology.num_joints != joints:
        raise ShapeMismatchError("Manifest V disagrees with its topology", (joints,), (topology.num_joints,))

    payload_path = path.parent.joinpath(payload_name)
    if not payload_path.is_file():
        raise MissingInputError(f"No dataset payload found at {payload_path}")

    payload = np.fromfile(payload_path, dtype=PAYLOAD_DTYPE)
    shape = (num_sequences, channels, frames, joints)
    if payload.size != int(np.prod(shape)):
        raise ShapeMismatchError("Payload size disagrees with the manifest shape", (payload.size,), shape)
    if not np.all(np.isfinite(payload)):
        raise NonFiniteValueError(f"Dataset payload at {payload_path} contains non-finite values")

    # native byte order, values unchanged
    data = payload.reshape(shape).astype(np.float32)
    try:
        sequences = [
            SkeletonSequence(data=data[i], label=int(labels[i]), subject_id=int(subjects[i]))
            for i in range(num_sequences)
        ]
        dataset = Dataset(sequences=sequences, topology=topology, split=split, num_classes=num_classes)
    except (InvalidInputError, InvalidTopologyError, TypeError, ValueError) as ex:
        raise MalformedHeaderError(f"Dataset manifest at {path} is inconsistent: {ex}") from ex

    LOGGER.debug(f"Loaded dataset of {len(dataset)} sequences from {path}")
    return dataset


def class_counts(labels: Sequence[int] | np.ndarray, num_classes: int) -> np.ndarray:
    """Number of samples per class"""
    return np.bincount(np.asarray(labels, dtype=np.int64), minlength=num_classes)
