"""
Reads defaults and descriptions from the signatures and docstrings of callables.
"""
import inspect
from collections.abc import Callable
from typing import Any

import docstring_parser

_VARIADIC = (inspect.Parameter.VAR_POSITIONAL, inspect.Parameter.VAR_KEYWORD)


def get_default_args(func: Callable) -> dict[str, Any]:
    """Map of every parameter of ``func`` that has a default to that default"""
    defaults = {}
    for param in inspect.signature(func).parameters.values():
        if param.kind in _VARIADIC or param.default is param.empty:
            continue
        defaults[param.name] = param.default
    return defaults


def get_short_description(func: Callable) -> str:
    """The summary line of the docstring of ``func`` without its closing full stop, or an empty string"""
    summary = docstring_parser.parse(inspect.getdoc(func) or "").short_description
    return summary.rstrip(".") if summary else ""
