"""
Pretty printers for the terminal.
"""
import os
import random
import sys
from collections.abc import Collection, Sequence

import pyfiglet

from pstl_cli import PROGRAM_NAME
from pstl_cli.manager import PSTLProcessor

# noinspection SpellCheckingInspection
LOGO_FONTS = ("basic", "chunky", "doom", "epic", "larry3d", "slant", "small", "standard")
LOGO_COLOURS = (94, 96, 92, 93, 95)


def get_terminal_width(default: int = 120) -> int:
    """Get the width in characters of the current terminal, or ``default`` when not attached to one"""
    try:
        return os.get_terminal_size().columns
    except OSError:
        return default


def _centred(text: str, width: int) -> str:
    return " " * max((width - len(text)) // 2, 0) + text


def print_logo(fonts: Sequence[str] = LOGO_FONTS, colours: Collection[int] = LOGO_COLOURS) -> None:
    """Print the program name as a banner in the centre of the terminal"""
    colours = list(colours)
    cols = get_terminal_width()
    figlet = pyfiglet.Figlet(font=random.choice(fonts), justify="left", width=cols)

    lines = figlet.renderText(PROGRAM_NAME).rstrip().split("\n")
    indent = " " * max((cols - max(len(line) for line in lines)) // 2, 0)
    offset = random.randrange(len(colours))
    for i, line in enumerate(lines):
        print(f"{indent}\33[1;{colours[(i + offset) % len(colours)]}m{line}\33[0m")
    print()


def print_line(text: str = "", line_char: str = "-") -> None:
    """Print a full width rule with ``text`` in its centre"""
    cols = get_terminal_width()
    text = f" {text} " if text else ""

    left = (cols - len(text)) // 2
    right = cols - len(text) - left
    print(f"\33[1;96m{line_char * left}\33[95m{text}\33[1;96m{line_char * right}\33[0m\n")


def print_time(seconds: float) -> None:
    """Print the elapsed time in the centre of the terminal"""
    mins, secs = divmod(int(seconds), 60)
    print(f"\33[1;95m{_centred(f'{mins} mins {secs} secs', get_terminal_width())}\33[0m")


###########################################################################
## Header printers and terminal setters
###########################################################################
def set_title(value: str) -> None:
    """Set the terminal title to given ``value``"""
    if not sys.stdout.isatty():
        return
    if sys.platform == "win32":
        os.system(f"title {value}")
    else:
        sys.stdout.write(f"\33]2;{value}\a")
        sys.stdout.flush()


def print_header() -> None:
    """Print header text to the terminal."""
    set_title(PROGRAM_NAME)
    print()
    print_logo()


def print_folders(processor: PSTLProcessor) -> None:
    """Print the key folder locations to the terminal"""
    if processor.logger.file_paths:
        processor.logger.info(f"\33[90mLogs: {", ".join(map(str, sorted(set(processor.logger.file_paths))))} \33[0m")
    processor.logger.info(f"\33[90mRuns: {processor.paths.base} \33[0m")
    print()


def print_sub_header(processor: PSTLProcessor) -> None:
    """Print sub-header text to the terminal."""
    print_folders(processor)
    processor.logger.info(f"\33[90mSeed: {processor.seed} \33[0m")


def print_command_header(name: str, processor: PSTLProcessor) -> None:
    """Set the terminal title and print the command header to the terminal."""
    set_title(f"{PROGRAM_NAME}: {name}")
    print_line(processor.get_func_log_name(name))
