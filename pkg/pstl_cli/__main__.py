"""
Main driver of the program.

User can run 'python -m pstl_cli ...' to access the program from this script.
"""
import logging
import sys
import traceback
from collections.abc import Collection

from pstl_cli import MODULE_ROOT
from pstl_cli.cli import PARSER, build_overrides, check_commands
from pstl_cli.config.core import RunConfig
from pstl_cli.exception import PSTLError
from pstl_cli.manager import PSTLProcessor
from pstl_cli.printers import print_line, print_time, print_header, print_folders, print_command_header, \
    print_sub_header

LOGGER = logging.getLogger(MODULE_ROOT)


###########################################################################
## Config and setup
###########################################################################
def setup() -> tuple[RunConfig, dict[str, RunConfig]]:
    """Parse args + config and configure logger."""
    parsed_args = PARSER.parse_args()
    check_commands(parsed_args)
    overrides = build_overrides(parsed_args)

    LOGGER.debug(f"Loading config from: {parsed_args.config}")
    base, commands = RunConfig.from_file(parsed_args.config, overrides=overrides)

    names = [name.replace("-", "_") for name in parsed_args.commands]
    check_commands_given(names)
    commands = {name: commands.get(name, base) for name in names}

    base.logging.bind_loggers(__name__)
    base.logging.stamp_file_handlers(dt=base.paths.dt)
    base.logging.apply()

    return base, commands


def check_commands_given(names: Collection[str]) -> None:
    """Exit cleanly when no command was given"""
    if not names:
        message = "No command specified"
        LOGGER.debug(message)
        print_line(message.upper())
        sys.exit(0)


###########################################################################
## Core
###########################################################################
def main(processor: PSTLProcessor, commands: dict[str, RunConfig]) -> None:
    """Main driver for CLI operations."""
    for name, cfg in commands.items():
        print_command_header(name, processor)

        processor.set_processor(name, cfg)
        processor.run()

        processor.logger.print_line()


def close(processor: PSTLProcessor) -> None:
    """Close the ``processor`` and log closing messages."""
    print_header()
    processor.logger.debug(f"Time taken: {processor.time_taken}")
    processor.paths.prune_empty()
    logging.shutdown()

    print_folders(processor)
    print_time(processor.time_taken)
    print()


def _print_error(ex: BaseException) -> None:
    LOGGER.debug(traceback.format_exc())
    print(f"\33[91m{"".join(traceback.format_exception_only(ex)).strip()}\33[0m")


if __name__ == "__main__":
    print_header()
    try:
        config_base, config_commands = setup()
    except PSTLError as error:
        _print_error(error)
        sys.exit(error.exit_code)

    main_processor = PSTLProcessor(config=config_base)
    print_sub_header(main_processor)

    exit_code = 0
    try:
        main(main_processor, config_commands)
    except PSTLError as error:
        _print_error(error)
        exit_code = error.exit_code
    except (Exception, KeyboardInterrupt) as error:
        _print_error(error)
        exit_code = 1
    finally:
        close(main_processor)

    sys.exit(exit_code)
