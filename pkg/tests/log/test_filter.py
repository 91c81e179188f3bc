import logging

import pytest

from pstl_cli.log.filter import abbreviate, format_full_func_name, LogConsoleFilter, LogFileFilter


def make_record(name: str = "test", func: str = "function_name", msg: str | None = None) -> logging.LogRecord:
    return logging.LogRecord(
        name=name, level=logging.INFO, pathname=__name__, lineno=10, msg=msg, args=None, exc_info=None, func=func,
    )


@pytest.mark.parametrize("parts,width,expected", [
    (["this", "is", "a", "short", "path"], 20, "this.is.a.short.path"),
    (["this", "is", "quite", "a", "long", "path"], 20, "t.i.q.a.long.path"),
    (["this", "path", "has", "a", "ClassName", "in_it"], 20, "t.p.h.a.CN.in_it"),
    (["pstl_cli", "training", "pretrain", "Pretrainer", "fit"], 10, "p.t.p.P.fit"),
    (["only_the_function_name_is_left"], 5, "only_the_function_name_is_left"),
])
def test_abbreviate(parts: list[str], width: int, expected: str):
    assert abbreviate(parts, width) == expected


def test_format_func_name_from_logger_name():
    record = make_record(name="pstl_cli.evaluation.protocols", func="linear_eval")
    format_full_func_name(record=record, width=60)
    assert record.funcName == "pstl_cli.evaluation.protocols.linear_eval"

    record = make_record(name="pstl_cli.evaluation.protocols", func="<module>")
    format_full_func_name(record=record, width=60)
    assert record.funcName == "pstl_cli.evaluation.protocols"


class _Caller:
    """Logs from a method so the filter can find the class of the instance"""

    def log(self) -> logging.LogRecord:
        records = []

        class Capture(logging.Handler):
            def emit(self, record: logging.LogRecord) -> None:
                records.append(record)

        logger = logging.getLogger("test.caller.capture")
        handler = Capture()
        handler.addFilter(LogConsoleFilter(module_width=200))
        logger.addHandler(handler)
        logger.setLevel(logging.DEBUG)
        logger.propagate = False
        try:
            logger.debug("message")
        finally:
            logger.removeHandler(handler)
        return records[0]


def test_console_filter_adds_class_of_caller():
    record = _Caller().log()
    assert record.funcName == f"{__name__}._Caller.log"


def test_file_filter():
    log_filter = LogFileFilter(name="test")
    record = make_record()

    record.msg = "normal message"
    log_filter.filter(record)
    assert record.msg == "normal message"
    assert record.funcName == "test.function_name"

    # noinspection SpellCheckingInspection
    record.msg = "\33[91;1mcolour \33[94;0mmessage\33[0m"
    log_filter.filter(record)
    assert record.msg == "colour message"
