import pytest

from pstl_cli.exception import ParserError
from pstl_cli.manager._dynamic import DynamicProcessor, commandmethod


class BaseCommands(DynamicProcessor):

    @commandmethod
    def first_command(self) -> str:
        return "first"

    def not_a_command(self) -> str:
        return "hidden"


class ChildCommands(BaseCommands):

    @commandmethod
    def second_command(self, value: int = 1) -> int:
        return value * 2


def test_collects_commands_in_definition_order():
    assert BaseCommands.__commands__ == ("first_command",)
    assert ChildCommands.__commands__ == ("first_command", "second_command")
    assert ChildCommands.command_names() == ["first-command", "second-command"]


def test_runs_selected_command():
    processor = ChildCommands()

    processor._set_processor_name("first-command")
    assert processor() == "first"

    processor._set_processor_name("second_command")
    assert processor() == 2
    assert processor(value=4) == 8


def test_rejects_unknown_commands():
    processor = ChildCommands()

    with pytest.raises(ParserError):
        processor()
    with pytest.raises(ParserError):
        processor._set_processor_name("not_a_command")
    with pytest.raises(ParserError):
        BaseCommands()._set_processor_name("second-command")
