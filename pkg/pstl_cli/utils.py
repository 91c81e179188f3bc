"""
Generic helpers shared across the package.
"""
import os
import tempfile
from collections.abc import Iterable, Mapping, MutableMapping
from pathlib import Path
from typing import Any


class SafeDict(dict):
    """Extends dict to ignore missing keys when using format_map operations"""
    def __missing__(self, key: str) -> str:
        return "{" + key + "}"


def to_collection[T](data: T | Iterable[T] | None, cls: type = tuple) -> Any:
    """Safely turn any object into a collection of the given ``cls``. Strings and mappings count as one item."""
    if data is None:
        return cls()
    if isinstance(data, (str, bytes, Mapping)) or not isinstance(data, Iterable):
        return cls([data])
    return cls(data)


def merge_maps[T: MutableMapping](source: T, new: Mapping, overwrite: bool = True) -> T:
    """
    Recursively merge ``new`` into ``source`` in place.

    :param source: The mapping to update.
    :param new: The mapping to take values from.
    :param overwrite: When False, keys already present in ``source`` keep their value.
    :return: The updated ``source``.
    """
    for key, value in new.items():
        if isinstance(value, Mapping) and isinstance(source.get(key), MutableMapping):
            merge_maps(source[key], value, overwrite=overwrite)
        elif overwrite or key not in source:
            source[key] = value

    return source


def unflatten(key: str, value: Any, sep: str = ".") -> dict[str, Any]:
    """Turn a dotted ``key`` such as ``train.epochs`` into a nested mapping holding ``value``"""
    result: dict[str, Any] = {}
    current = result
    parts = key.split(sep)
    for part in parts[:-1]:
        current = current.setdefault(part, {})
    current[parts[-1]] = value
    return result


def flatten(data: Mapping[str, Any], prefix: str = "", sep: str = ".") -> dict[str, Any]:
    """Flatten a nested mapping into dotted keys"""
    result: dict[str, Any] = {}
    for key, value in data.items():
        name = f"{prefix}{sep}{key}" if prefix else str(key)
        if isinstance(value, Mapping) and value:
            result |= flatten(value, prefix=name, sep=sep)
        else:
            result[name] = value
    return result


def replace_file(path: str | Path, data: bytes | str, encoding: str = "utf-8") -> Path:
    """
    Write ``data`` to a temporary sibling of ``path``, then move it over ``path`` in one step.
    Readers see either the previous file or the complete new one.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode(encoding) if isinstance(data, str) else data

    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as file:
            file.write(raw)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path
