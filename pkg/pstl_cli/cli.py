"""
Sets up parser for CLI arguments.
"""
from argparse import ArgumentParser, Namespace, RawDescriptionHelpFormatter
from pathlib import Path
from typing import Any

import yaml

from pstl_cli import PROGRAM_NAME, PACKAGE_ROOT
from pstl_cli.config.operations.signature import get_short_description
from pstl_cli.config.pipeline import PretrainMode
from pstl_cli.exception import ParserError
from pstl_cli.manager import PSTLProcessor
from pstl_cli.skeleton import Modality
from pstl_cli.utils import merge_maps, unflatten

COMMAND_HELP = "\n".join(
    f"  {name:<14}{get_short_description(getattr(PSTLProcessor, name.replace('-', '_')))}"
    for name in PSTLProcessor.command_names()
)

PARSER = ArgumentParser(
    PROGRAM_NAME,
    formatter_class=RawDescriptionHelpFormatter,
    epilog=f"commands:\n{COMMAND_HELP}",
)

PARSER.add_argument(
    "-c", "--config", type=Path,
    default=PACKAGE_ROOT.joinpath("configs", "desk.yml"),
    help="The path to the configuration file for this execution"
)
PARSER.add_argument(
    "commands", type=str, nargs="*", default=[], metavar="command",
    help=f"{PROGRAM_NAME} commands to run in order."
)

PARSER.add_argument(
    "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
    help="Override any config value by its dotted key e.g. 'mask.n_mask=6'. May be given many times."
)
PARSER.add_argument(
    "--mode", type=str, choices=[str(mode) for mode in PretrainMode],
    help="Shorthand for '--set train.mode=...'"
)
PARSER.add_argument(
    "--modality", type=str, choices=[str(modality) for modality in Modality],
    help="Shorthand for '--set train.modality=...'"
)
PARSER.add_argument("--seed", type=int, help="Shorthand for '--set seed=...'")
PARSER.add_argument("--out-dir", type=Path, help="Shorthand for '--set paths.base=...'")


def parse_override(value: str) -> dict[str, Any]:
    """
    Parse one ``KEY=VALUE`` override into a nested map. The value is read as YAML.

    :raise ParserError: When the override has no '=' or the value is not valid YAML.
    """
    key, sep, raw = value.partition("=")
    if not sep or not key.strip():
        raise ParserError("Overrides must take the form KEY=VALUE", value=value)

    try:
        parsed = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as ex:
        raise ParserError("Could not parse override value", key=key, value=raw) from ex
    return unflatten(key.strip(), parsed)


def build_overrides(args: Namespace) -> dict[str, Any]:
    """Combine the '--set' overrides with the shorthand options. Shorthands take precedence."""
    overrides: dict[str, Any] = {}
    for value in args.overrides:
        merge_maps(overrides, parse_override(value))

    shorthands = {
        "train.mode": args.mode,
        "train.modality": args.modality,
        "seed": args.seed,
        "paths.base": str(args.out_dir) if args.out_dir else None,
    }
    for key, value in shorthands.items():
        if value is not None:
            merge_maps(overrides, unflatten(key, value))

    return overrides


def check_commands(args: Namespace) -> None:
    """Exit through the parser when any of the given commands is unknown"""
    names = PSTLProcessor.command_names()
    unknown = [command for command in args.commands if command.replace("_", "-") not in names]
    if unknown:
        PARSER.error(f"invalid choice: {", ".join(unknown)} (choose from {", ".join(names)})")
