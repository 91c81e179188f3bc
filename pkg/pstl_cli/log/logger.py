"""
The logger class used throughout the package, with extra levels and progress bars.
"""
import logging
from collections.abc import Iterable, Iterator
from pathlib import Path
from typing import Any

from tqdm.auto import tqdm

INFO_EXTRA = logging.INFO - 1
logging.addLevelName(INFO_EXTRA, "INFO_EXTRA")
REPORT = logging.INFO - 3
logging.addLevelName(REPORT, "REPORT")
STAT = logging.DEBUG + 3
logging.addLevelName(STAT, "STAT")


class PSTLLogger(logging.Logger):
    """
    Logger with levels for extra information, reports and per-step statistics,
    and helpers for printing blank lines and progress bars that respect the configured handlers.
    """

    __slots__ = ()

    #: When True, remove empty lines from console output.
    compact: bool = False
    #: When True, never show progress bars.
    disable_bars: bool = False

    @property
    def file_paths(self) -> list[Path]:
        """Paths of all files this logger writes to, including through its parents"""
        paths = []
        logger: logging.Logger | None = self
        while logger is not None:
            paths.extend(
                Path(handler.baseFilename) for handler in logger.handlers if isinstance(handler, logging.FileHandler)
            )
            logger = logger.parent if logger.propagate else None
        return paths

    @property
    def stdout_handlers(self) -> list[logging.StreamHandler]:
        """All console handlers this logger writes to"""
        handlers = []
        logger: logging.Logger | None = self
        while logger is not None:
            handlers.extend(
                handler for handler in logger.handlers
                if isinstance(handler, logging.StreamHandler) and not isinstance(handler, logging.FileHandler)
            )
            logger = logger.parent if logger.propagate else None
        return handlers

    def info_extra(self, msg: object, *args, **kwargs) -> None:
        """Log 'msg % args' with severity 'INFO_EXTRA'."""
        if self.isEnabledFor(INFO_EXTRA):
            self._log(INFO_EXTRA, msg, args, **kwargs)

    def report(self, msg: object, *args, **kwargs) -> None:
        """Log 'msg % args' with severity 'REPORT'."""
        if self.isEnabledFor(REPORT):
            self._log(REPORT, msg, args, **kwargs)

    def stat(self, msg: object, *args, **kwargs) -> None:
        """Log 'msg % args' with severity 'STAT'."""
        if self.isEnabledFor(STAT):
            self._log(STAT, msg, args, **kwargs)

    def print_line(self, level: int = logging.INFO) -> None:
        """Print a new line when not compact and any console handler shows messages at the given ``level``"""
        if self.compact:
            return
        if any(handler.level <= level for handler in self.stdout_handlers):
            print()

    def get_iterator[T](self, iterable: Iterable[T] | None = None, **kwargs: Any) -> Iterator[T]:
        """
        Wrap ``iterable`` in a progress bar, unless bars are disabled or no console handler shows INFO.

        :param iterable: The items to iterate over.
        :param kwargs: Passed to ``tqdm`` e.g. ``total``, ``desc``, ``unit``.
        """
        show = any(handler.level <= logging.INFO for handler in self.stdout_handlers)
        kwargs.setdefault("leave", False)
        kwargs.setdefault("dynamic_ncols", True)
        kwargs.setdefault("colour", "blue")
        return tqdm(iterable, disable=self.disable_bars or not show, **kwargs)


logging.setLoggerClass(PSTLLogger)
