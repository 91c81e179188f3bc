"""
Log file handlers which name every log after the execution time and prune the logs of earlier executions.
"""
import logging
import os
import shutil
import tempfile
from datetime import datetime, timedelta
from pathlib import Path

from pstl_cli.log import LOGGING_DT_FORMAT

#: Map of accepted 'when' values to the :py:class:`timedelta` argument they stand for.
TIME_UNITS = {
    "s": "seconds", "second": "seconds", "seconds": "seconds",
    "m": "minutes", "minute": "minutes", "minutes": "minutes",
    "h": "hours", "hour": "hours", "hours": "hours",
    "d": "days", "day": "days", "days": "days",
    "w": "weeks", "week": "weeks", "weeks": "weeks",
}

#: Stands for the execution time in a log path template.
DT_PLACEHOLDER = "{}"


def to_timedelta(when: str, interval: int) -> timedelta:
    """Convert a ``when`` unit e.g. 'h' and ``interval`` multiplier into a :py:class:`timedelta`"""
    unit = TIME_UNITS.get(when.casefold())
    if unit is None:
        raise ValueError(f"Unrecognised time unit: {when!r}. Accepted units: {sorted(set(TIME_UNITS))}")
    return timedelta(**{unit: interval})


def stamp_of(path: Path, template: str) -> datetime | None:
    """The execution time encoded in ``path`` by the path ``template``, or None when it holds none"""
    if DT_PLACEHOLDER not in template:
        return None

    prefix, _, suffix = template.partition(DT_PLACEHOLDER)
    text = str(path)
    if not text.startswith(prefix) or not text.endswith(suffix):
        return None
    try:
        return datetime.strptime(text[len(prefix):len(text) - len(suffix)], LOGGING_DT_FORMAT)
    except ValueError:
        return None


def prune_logs(
        template: str,
        keep: Path,
        now: datetime,
        max_age: timedelta | None = None,
        max_count: int | None = None,
) -> list[datetime]:
    """
    Delete the siblings of ``keep`` left by earlier executions, i.e. those named by ``template``.

    A sibling is deleted when it is an empty folder, when its stamp is older than ``now - max_age``,
    or when it is among the oldest beyond the ``max_count - 1`` kept alongside ``keep``.

    :param template: The path template holding :py:data:`DT_PLACEHOLDER` where the execution time goes.
    :param keep: The path of the current execution. Never deleted.
    :return: The stamps of every deleted path.
    """
    folder = keep.parent
    if not folder.is_dir():
        return []

    siblings = sorted(
        path for path in folder.iterdir() if path != keep and stamp_of(path, template) is not None
    )
    doomed: set[Path] = set()
    for path in siblings:
        stamp = stamp_of(path, template)
        if path.is_dir() and not any(path.iterdir()):
            doomed.add(path)
        elif max_age is not None and stamp < now - max_age:
            doomed.add(path)

    if max_count is not None:
        survivors = [path for path in siblings if path not in doomed]
        excess = len(survivors) - max(max_count - 1, 0)
        doomed.update(survivors[:max(excess, 0)])

    removed = []
    for path in sorted(doomed):
        shutil.rmtree(path) if path.is_dir() else path.unlink()
        if (stamp := stamp_of(path, template)) is not None and stamp not in removed:
            removed.append(stamp)
    return removed


class CurrentTimeRotatingFileHandler(logging.FileHandler):
    """
    Writes to a log file named after the execution time, pruning older logs in the same folder on creation.

    :param filename: The path template of the log file. A '{}' part is replaced with the execution time.
        When None, defaults to '{}.log'
    :param dt: The execution time. Defaults to now.
    :param when: The unit of ``interval`` e.g. 'h'. Accepts the keys of :py:data:`TIME_UNITS`.
    :param interval: Logs older than this many ``when`` units before ``dt`` are deleted.
    :param count: The maximum number of logs to keep, including the current one.
    :param delay: When True, the file opening is deferred until the first call to emit().
    :param errors: Used to determine how encoding errors are handled.
    """

    def __init__(
            self,
            filename: str | Path | None = None,
            encoding: str | None = None,
            dt: datetime | None = None,
            when: str | None = None,
            interval: int | None = None,
            count: int | None = None,
            delay: bool = False,
            errors: str | None = None
    ):
        self.dt = dt or datetime.now()
        template = str(filename or f"{DT_PLACEHOLDER}.log")
        self.filename = Path(template.replace(DT_PLACEHOLDER, self.dt.strftime(LOGGING_DT_FORMAT)))
        self.filename.parent.mkdir(parents=True, exist_ok=True)

        self.delta = to_timedelta(when, interval) if when and interval else None
        self.count = count
        self.removed = prune_logs(template, keep=self.filename, now=self.dt, max_age=self.delta, max_count=count)

        # test runs write their logs to the temp folder
        target = Path(tempfile.gettempdir(), self.filename.name) if "PYTEST_VERSION" in os.environ else self.filename
        super().__init__(filename=target, mode="w", encoding=encoding, delay=delay, errors=errors)
