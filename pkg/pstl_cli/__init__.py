"""
Welcome to the PSTL CLI

Partial spatio-temporal pretraining of skeleton action encoders at desk scale.
"""
from pathlib import Path

PROGRAM_NAME = "PSTL CLI"
__version__ = "0.1"

MODULE_ROOT: str = Path(__file__).parent.name
PACKAGE_ROOT: Path = Path(__file__).parent.parent

from pstl_cli.log.logger import PSTLLogger as _PSTLLogger  # noqa: E402  sets the logger class for the package
