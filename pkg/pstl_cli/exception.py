"""
Exceptions for the entire program.

Every exception carries the process exit code the CLI terminates with when it goes uncaught.
"""
from collections.abc import Iterable
from typing import Any

from pstl_cli.utils import SafeDict


class PSTLError(Exception):
    """Base exception for all errors raised by this program."""
    exit_code: int = 1


class ParserError(PSTLError, ValueError):
    """
    Exception raised when parsing config gives an exception.

    :param key: The key that caused the error.
    :param value: The value that caused the error.
    :param message: Explanation of the error.
    """
    exit_code = 2

    def __init__(self, message: str = "Could not process config", key: Any | None = None, value: Any | None = None):
        suffix = []

        key = ".".join(map(str, key)) if isinstance(key, Iterable) and not isinstance(key, str) else key
        if key and "{key}" in message:
            message = message.format_map(SafeDict(key=key))
        elif key:
            suffix.append(f"key='{key}'")

        try:
            value = ", ".join(value) if isinstance(value, Iterable) and not isinstance(value, str) else value
        except TypeError:
            value = str(value)

        if value and "{value}" in message:
            message = message.format_map(SafeDict(value=value))
        elif value:
            suffix.append(f"value='{value}'")

        self.key = key
        self.value = value
        self.message = message

        super().__init__(": ".join([message, " | ".join(suffix)]) if suffix else message)


###########################################################################
## Input validation
###########################################################################
class InvalidInputError(PSTLError, ValueError):
    """Exception raised when an operation is given input outside its preconditions."""
    exit_code = 3


class InvalidModalityError(InvalidInputError):
    """Exception raised when an operation needs 3D coordinate channels and gets something else."""


class InvalidTopologyError(InvalidInputError):
    """Exception raised when a skeleton graph breaks a structural invariant."""


class ShapeMismatchError(PSTLError, ValueError):
    """
    Exception raised when array shapes are incompatible.

    :param message: Explanation of the error.
    :param shapes: The offending shapes, appended to the message.
    """
    exit_code = 4

    def __init__(self, message: str = "Shape mismatch", *shapes: Iterable[int]):
        self.shapes = tuple(tuple(shape) for shape in shapes)
        if self.shapes:
            message = f"{message}: " + " vs ".join(str(shape) for shape in self.shapes)
        super().__init__(message)


###########################################################################
## Numerics
###########################################################################
class NumericFaultError(PSTLError, ArithmeticError):
    """Exception raised when a computation produces NaN or infinite values."""
    exit_code = 5


class GradCheckError(PSTLError):
    """Exception raised when analytic gradients disagree with finite differences."""
    exit_code = 10


###########################################################################
## Files
###########################################################################
class MalformedHeaderError(PSTLError, ValueError):
    """Exception raised when a dataset or checkpoint manifest cannot be understood."""
    exit_code = 6


class NonFiniteValueError(PSTLError, ValueError):
    """Exception raised when a stored payload contains NaN or infinite values."""
    exit_code = 7


class MissingInputError(PSTLError, FileNotFoundError):
    """Exception raised when an artifact a command depends on does not exist."""
    exit_code = 8


class CheckpointMismatchError(PSTLError, ValueError):
    """Exception raised when a checkpoint does not fit the data or config it is used with."""
    exit_code = 9
