"""
Saving and loading encoder states.

A checkpoint is a YAML manifest holding the architecture, initialisation record, run metadata and
the name, kind, shape and offset of every tensor, plus a payload of little-endian 64-bit floats.
"""
import logging
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np
import yaml
from pydantic import ValidationError

from pstl_cli.config.pipeline import EncoderConfig
from pstl_cli.exception import MalformedHeaderError, MissingInputError, CheckpointMismatchError, NonFiniteValueError
from pstl_cli.model.encoder import EncoderState
from pstl_cli.numerics.tensor import Tensor
from pstl_cli.utils import replace_file

FORMAT_NAME = "pstl-checkpoint"
FORMAT_VERSION = 1
PAYLOAD_DTYPE = np.dtype("<f8")

LOGGER = logging.getLogger(__name__)


def save_checkpoint(state: EncoderState, path: str | Path, metadata: Mapping[str, Any] | None = None) -> Path:
    """
    Save ``state`` as a manifest at ``path`` and a payload file next to it.

    :param metadata: Extra information to store e.g. the pretraining mode, input modality and step count.
    :return: The path to the manifest.
    """
    path = Path(path)
    if path.suffix.casefold() not in (".yml", ".yaml"):
        path = path.joinpath("checkpoint.yml")
    path.parent.mkdir(parents=True, exist_ok=True)
    payload_path = path.with_suffix(".bin")

    tensors = [(name, "parameter", param.values) for name, param in state.parameters.items()]
    tensors += [(name, "buffer", buffer) for name, buffer in state.buffers.items()]

    entries = []
    offset = 0
    for name, kind, values in tensors:
        entries.append({"name": name, "kind": kind, "shape": list(values.shape), "offset": offset})
        offset += values.size

    manifest = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "payload": payload_path.name,
        "config": state.config.model_dump(mode="json"),
        "init": dict(state.init),
        "metadata": dict(metadata or {}),
        "entries": entries,
    }

    payload = np.concatenate([values.ravel() for _, _, values in tensors]) if tensors else np.empty(0)
    replace_file(payload_path, payload.astype(PAYLOAD_DTYPE).tobytes())
    replace_file(path, yaml.safe_dump(manifest, default_flow_style=None, sort_keys=False))

    LOGGER.debug(f"Saved checkpoint with {len(entries)} tensors to {path}")
    return path


def _read_manifest(path: Path) -> dict[str, Any]:
    try:
        with path.open("r", encoding="utf-8") as file:
            manifest = yaml.safe_load(file)
    except yaml.YAMLError as ex:
        raise MalformedHeaderError(f"Could not parse checkpoint manifest at {path}: {ex}") from ex

    if not isinstance(manifest, dict) or manifest.get("format") != FORMAT_NAME:
        raise MalformedHeaderError(f"File at {path} is not a {FORMAT_NAME} manifest")
    if manifest.get("version") != FORMAT_VERSION:
        raise MalformedHeaderError(f"Unsupported checkpoint format version: {manifest.get('version')!r}")
    for key in ("payload", "config", "entries"):
        if key not in manifest:
            raise MalformedHeaderError(f"Checkpoint manifest is missing key '{key}'")
    return manifest


def load_checkpoint(path: str | Path) -> tuple[EncoderState, dict[str, Any]]:
    """
    Load an encoder state and its metadata. Values are restored bit-exactly.

    The loaded state is in evaluation mode.

    :raise MissingInputError: When the manifest or payload does not exist.
    :raise MalformedHeaderError: When the manifest cannot be understood.
    :raise CheckpointMismatchError: When the stored tensors do not fit the stored architecture.
    :raise NonFiniteValueError: When the payload holds NaN or infinite values.
    """
    path = Path(path)
    if path.is_dir():
        path = path.joinpath("checkpoint.yml")
    if not path.is_file():
        raise MissingInputError(f"No checkpoint found at {path}")

    manifest = _read_manifest(path)
    try:
        config = EncoderConfig(**manifest["config"])
    except (ValidationError, TypeError) as ex:
        raise MalformedHeaderError(f"Invalid encoder config in checkpoint manifest: {ex}") from ex

    payload_path = path.parent.joinpath(manifest["payload"])
    if not payload_path.is_file():
        raise MissingInputError(f"No checkpoint payload found at {payload_path}")
    payload = np.fromfile(payload_path, dtype=PAYLOAD_DTYPE)
    if not np.all(np.isfinite(payload)):
        raise NonFiniteValueError(f"Checkpoint payload at {payload_path} contains non-finite values")

    expected = EncoderState.expected_shapes(config)
    stored = {entry["name"]: tuple(entry["shape"]) for entry in manifest["entries"]}
    if stored != expected:
        missing = sorted(set(expected) - set(stored))
        unexpected = sorted(set(stored) - set(expected))
        wrong = sorted(name for name in set(stored) & set(expected) if stored[name] != expected[name])
        raise CheckpointMismatchError(
            f"Checkpoint tensors do not fit its encoder config | missing={missing} "
            f"unexpected={unexpected} wrong_shape={wrong}"
        )

    parameters: dict[str, Tensor] = {}
    buffers: dict[str, np.ndarray] = {}
    for entry in manifest["entries"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape, dtype=np.int64))
        start = entry["offset"]
        if start < 0 or start + size > payload.size:
            raise CheckpointMismatchError(f"Checkpoint payload is too short for tensor '{entry['name']}'")

        values = payload[start:start + size].astype(np.float64).reshape(shape)
        if entry["kind"] == "parameter":
            parameters[entry["name"]] = Tensor(values, requires_grad=True, name=entry["name"])
        else:
            buffers[entry["name"]] = values

    total = sum(int(np.prod(shape, dtype=np.int64)) for shape in stored.values())
    if total != payload.size:
        raise CheckpointMismatchError(f"Checkpoint payload holds {payload.size} values, manifest declares {total}")

    state = EncoderState(
        config=config, parameters=parameters, buffers=buffers, init=dict(manifest.get("init") or {}), training=False
    )
    LOGGER.debug(f"Loaded checkpoint with {len(manifest['entries'])} tensors from {path}")
    return state, dict(manifest.get("metadata") or {})


def check_compatible(state: EncoderState, num_channels: int, config: EncoderConfig | None = None) -> None:
    """
    :raise CheckpointMismatchError: When the checkpoint cannot encode data with ``num_channels`` channels,
        or was built with a different architecture from ``config``.
    """
    if state.config.in_channels != num_channels:
        raise CheckpointMismatchError(
            f"Checkpoint expects {state.config.in_channels} input channels, data has {num_channels}"
        )
    if config is not None and config != state.config:
        raise CheckpointMismatchError("Checkpoint architecture differs from the configured encoder")
