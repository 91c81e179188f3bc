import string
from datetime import datetime, timedelta
from pathlib import Path
from random import choice

import pytest

from pstl_cli.log import LOGGING_DT_FORMAT
from pstl_cli.log.handlers import CurrentTimeRotatingFileHandler, prune_logs, stamp_of, to_timedelta
from tests.utils import random_str


@pytest.mark.parametrize("when,interval,expected", [
    ("s", 30, timedelta(seconds=30)), ("H", 2, timedelta(hours=2)), ("days", 1, timedelta(days=1)),
])
def test_to_timedelta(when: str, interval: int, expected: timedelta):
    assert to_timedelta(when, interval) == expected


def test_to_timedelta_fails_on_unknown_unit():
    with pytest.raises(ValueError):
        to_timedelta("fortnight", 1)


def test_stamp_of(tmp_path: Path):
    dt = datetime(2024, 3, 1, 12, 30, 15)
    template = str(tmp_path.joinpath("run_{}.log"))

    assert stamp_of(tmp_path.joinpath(f"run_{dt.strftime(LOGGING_DT_FORMAT)}.log"), template) == dt
    assert stamp_of(tmp_path.joinpath("run_latest.log"), template) is None
    assert stamp_of(tmp_path.joinpath("other.txt"), template) is None
    assert stamp_of(tmp_path.joinpath("run_x.log"), str(tmp_path.joinpath("run.log"))) is None


def test_current_time_file_handler_names_file(tmp_path: Path):
    handler = CurrentTimeRotatingFileHandler(delay=True)
    assert handler.filename == Path(handler.dt.strftime(LOGGING_DT_FORMAT) + ".log")

    handler = CurrentTimeRotatingFileHandler(filename=tmp_path.joinpath("test.log"), delay=True)
    assert handler.filename == tmp_path.joinpath("test.log")

    dt = datetime(2024, 1, 2, 3, 4, 5)
    handler = CurrentTimeRotatingFileHandler(filename=tmp_path.joinpath("folder", "file_{}_suffix.log"), dt=dt,
                                             delay=True)
    assert handler.dt == dt
    assert handler.filename == tmp_path.joinpath("folder", f"file_{dt.strftime(LOGGING_DT_FORMAT)}_suffix.log")
    assert handler.filename.parent.is_dir()


def write_random(path: Path) -> None:
    with open(path, "w") as file:
        file.write("".join(choice(string.ascii_letters) for _ in range(600)))


@pytest.fixture
def log_paths(tmp_path: Path) -> list[Path]:
    """Generate a set of log files, one for every other hour of the last two days"""
    dt_now = datetime.now()

    paths = []
    for i in range(1, 50, 2):
        path = tmp_path.joinpath((dt_now - timedelta(hours=i)).strftime(LOGGING_DT_FORMAT) + ".log")
        write_random(path)
        paths.append(path)

    return paths


def test_current_time_file_handler_prunes_by_time(log_paths: list[Path], tmp_path: Path):
    handler = CurrentTimeRotatingFileHandler(filename=tmp_path.joinpath("{}.log"), when="h", interval=10, delay=True)

    assert len(handler.removed) == 20
    for dt in handler.removed:
        assert dt < handler.dt - timedelta(hours=10)
    for path in tmp_path.glob("*"):
        dt = datetime.strptime(path.stem, LOGGING_DT_FORMAT)
        assert dt >= handler.dt - timedelta(hours=10)


def test_current_time_file_handler_prunes_by_count(log_paths: list[Path], tmp_path: Path):
    CurrentTimeRotatingFileHandler(filename=tmp_path.joinpath("{}.log"), count=10, delay=True)

    remaining = sorted(tmp_path.glob("*"))
    assert len(remaining) == 9  # the current log makes 10
    assert remaining == sorted(log_paths)[-9:]


def test_current_time_file_handler_prunes_combined(log_paths: list[Path], tmp_path: Path):
    handler = CurrentTimeRotatingFileHandler(
        filename=tmp_path.joinpath("{}.log"), when="h", interval=10, count=3, delay=True
    )

    for path in tmp_path.glob("*"):
        dt = datetime.strptime(path.stem, LOGGING_DT_FORMAT)
        assert dt >= handler.dt - timedelta(hours=10)

    assert len(list(tmp_path.glob("*"))) == 2


def test_prune_logs_removes_empty_folders(tmp_path: Path):
    dt_now = datetime.now()

    for i in range(1, 50, 2):
        path = tmp_path.joinpath((dt_now - timedelta(hours=i)).strftime(LOGGING_DT_FORMAT))
        path.mkdir(parents=True)
        if i < 10:  # all folders with dt >10hrs will be empty
            write_random(path.joinpath(random_str() + ".txt"))

    current = tmp_path.joinpath(dt_now.strftime(LOGGING_DT_FORMAT))
    removed = prune_logs(str(tmp_path.joinpath("{}")), keep=current, now=dt_now, max_age=timedelta(hours=20))

    assert len(removed) == 20
    for path in tmp_path.glob("*"):
        dt = datetime.strptime(path.name, LOGGING_DT_FORMAT)
        assert dt >= dt_now - timedelta(hours=10)
