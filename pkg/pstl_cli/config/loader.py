"""
Handles loading of run config from a config file (YAML or JSON), resolving nested 'include' files.
"""
import json
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import yaml

from pstl_cli.exception import MissingInputError, ParserError
from pstl_cli.utils import merge_maps, to_collection

#: The key which names further files to merge into the mapping holding it.
INCLUDE_KEY = "include"


class MultiFileLoader(yaml.SafeLoader):
    """
    YAML loader which merges the files named under an 'include' key into the mapping holding that key.
    Values already set in the including mapping take precedence over included values.
    Relative include paths resolve against the folder of the including file.
    """

    @classmethod
    def load(cls, path: str | Path) -> Any:
        """
        Load a YAML or JSON file from the given ``path``.

        :raise MissingInputError: When the file does not exist.
        :raise ParserError: When the file type is not recognised or the file cannot be parsed.
        """
        path = Path(path)
        if not path.is_file():
            raise MissingInputError(f"Config file not found: {path}")

        try:
            with path.open("r", encoding="utf-8") as stream:
                match path.suffix.casefold():
                    case ".json":
                        return json.load(stream)
                    case ".yml" | ".yaml":
                        return yaml.load(stream, cls)
                    case _:
                        raise ParserError("Unrecognised config file type", value=path)
        except (yaml.YAMLError, json.JSONDecodeError) as ex:
            raise ParserError(f"Could not parse config file: {ex}", value=path) from ex

    @classmethod
    def load_mapping(cls, path: str | Path) -> dict[str, Any]:
        """
        Load a config file whose top level is a mapping. An empty file gives an empty mapping.

        :raise ParserError: When the top level is not a mapping.
        """
        loaded = cls.load(path)
        if loaded is None:
            return {}
        if not isinstance(loaded, Mapping):
            raise ParserError("Config file must hold a mapping at its top level", value=path)
        return dict(loaded)

    def __init__(self, stream: Any):
        super().__init__(stream)
        try:
            self._parent_path = Path(stream.name).parent
        except AttributeError:
            self._parent_path = Path.cwd()

    def construct_mapping(self, node: yaml.MappingNode, deep: bool = True) -> dict[Any, Any]:
        """Construct a mapping, merging in every included file"""
        mapping = super().construct_mapping(node, deep=deep)
        if INCLUDE_KEY not in mapping:
            return mapping

        for path in map(Path, to_collection(mapping.pop(INCLUDE_KEY))):
            if not path.is_absolute():
                path = self._parent_path.joinpath(path)

            include = self.load(path)
            if not isinstance(include, Mapping):
                raise ParserError(f"Included file at {path} is not a mapping", value=include)
            merge_maps(mapping, include, overwrite=False)

        return mapping
