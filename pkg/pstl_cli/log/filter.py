"""
Logging filters which replace the function name of every record with its qualified path, shortened to fit a column.
"""
import inspect
import logging
import re

ANSI_ESCAPE = re.compile(r"\33\[[0-9;]*m")


def abbreviate(parts: list[str], width: int) -> str:
    """
    Join ``parts`` with dots, shortening leading parts until the result fits ``width`` or only the last is left.
    A CamelCase part shortens to its capitals, any other part to its first character.
    """
    parts = list(parts)
    for i in range(len(parts) - 1):
        if len(".".join(parts)) <= width:
            break
        part = parts[i]
        if part:
            parts[i] = "".join(char for char in part if char.isupper()) if part[0].isupper() else part[0]
    return ".".join(parts)


def record_path(record: logging.LogRecord) -> list[str]:
    """
    The parts of the qualified path of the function that logged ``record``.
    Records logged from a method include the class of the instance they were called on.
    """
    instance = None
    for frame in inspect.stack(context=0)[1:]:
        if frame.filename == record.pathname and frame.lineno == record.lineno:
            instance = frame.frame.f_locals.get("self")
            break

    if instance is not None and not isinstance(instance, type):
        cls = type(instance)
        return [*cls.__module__.split("."), cls.__name__, record.funcName.rsplit(".", 1)[-1]]

    parts = record.name.split(".")
    if record.funcName and record.funcName != "<module>":
        parts.append(record.funcName)
    return parts


def format_full_func_name(record: logging.LogRecord, width: int = 40) -> None:
    """Replace the function name of ``record`` with its qualified path, abbreviated to ``width`` characters"""
    record.funcName = abbreviate(record_path(record), width)


class _QualifiedNameFilter(logging.Filter):
    """
    :param module_width: The column width the qualified function path is shortened to.
    """

    __slots__ = ("module_width",)

    def __init__(self, name: str = "", module_width: int = 40):
        super().__init__(name)
        self.module_width = module_width

    def filter(self, record: logging.LogRecord) -> logging.LogRecord:
        format_full_func_name(record, width=self.module_width)
        return record


class LogConsoleFilter(_QualifiedNameFilter):
    """Filter for logging to the console."""


class LogFileFilter(_QualifiedNameFilter):
    """Filter for logging to a file. Also strips ANSI colour codes from messages."""

    def filter(self, record: logging.LogRecord) -> logging.LogRecord:
        record.msg = ANSI_ESCAPE.sub("", str(record.msg))
        return super().filter(record)
