import logging.config

import numpy as np
import pytest
import yaml

from pstl_cli import MODULE_ROOT
from pstl_cli.config.pipeline import DataConfig
from pstl_cli.log.logger import PSTLLogger
from pstl_cli.skeleton import Dataset, compact10
from pstl_cli.skeleton.synthetic import generate_synthetic
from tests.utils import path_logging_config


# noinspection PyUnusedLocal
@pytest.hookimpl
def pytest_configure(config: pytest.Config):
    """Loads logging config"""
    if not path_logging_config.is_file():
        return

    with open(path_logging_config, "r", encoding="utf-8") as file:
        log_config = yaml.full_load(file)

    log_config.pop("compact", False)
    PSTLLogger.disable_bars = True
    PSTLLogger.compact = True

    # tests never write log files
    log_config["handlers"] = {k: v for k, v in log_config["handlers"].items() if "filename" not in v}
    for logger in [*log_config["loggers"].values(), log_config.get("root", {})]:
        logger["handlers"] = [h for h in logger.get("handlers", []) if h in log_config["handlers"]]

    for formatter in log_config["formatters"].values():  # ensure ANSI colour codes in format are recognised
        formatter["format"] = formatter["format"].replace(r"\33", "\33")

    log_config["loggers"][MODULE_ROOT] = log_config["loggers"]["test"]
    logging.config.dictConfig(log_config)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def topology():
    return compact10()


@pytest.fixture(scope="session")
def small_dataset() -> Dataset:
    """4 classes of 6 sequences each on the compact body, 2 test sequences per class"""
    return generate_synthetic(DataConfig(sequences_per_class=6, frames=16, test_fraction=1 / 3), seed=7)
