"""
Base class for processors whose methods are selected by name at runtime.
"""
from collections.abc import Callable
from typing import Any, ClassVar

from pstl_cli.exception import ParserError


def commandmethod[T: Callable](func: T) -> T:
    """Mark a method of a :py:class:`DynamicProcessor` as runnable by name from the CLI"""
    func.is_command = True
    return func


class DynamicProcessor:
    """
    Processor which runs one of its :py:func:`commandmethod` decorated methods, selected by name.
    Names may use '-' or '_' interchangeably.
    """

    #: The names of every command method on this class, in definition order.
    __commands__: ClassVar[tuple[str, ...]] = ()

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)

        names = {}
        for klass in reversed(cls.__mro__):
            for name, member in vars(klass).items():
                if getattr(member, "is_command", False):
                    names[name] = None
        cls.__commands__ = tuple(names)

    @classmethod
    def command_names(cls) -> list[str]:
        """The names of every command as typed on the command line"""
        return [name.replace("_", "-") for name in cls.__commands__]

    def __init__(self):
        self._processor_name: str | None = None

    def _set_processor_name(self, name: str) -> None:
        name = name.replace("-", "_")
        if name not in self.__commands__:
            raise ParserError(f"Unrecognised command. Choose from: {self.command_names()}", value=name)
        self._processor_name = name

    @property
    def _processor_method(self) -> Callable[[], Any]:
        if self._processor_name is None:
            raise ParserError("No command has been selected")
        return getattr(self, self._processor_name)

    def __call__(self, *args, **kwargs) -> Any:
        return self._processor_method(*args, **kwargs)
