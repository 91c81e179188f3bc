import json
import logging
from datetime import datetime, timedelta
from pathlib import Path
from random import choice

import pytest
import yaml

from pstl_cli import MODULE_ROOT
from pstl_cli.config.core import Paths, Logging, RunConfig
from pstl_cli.exception import ParserError
from pstl_cli.log.handlers import CurrentTimeRotatingFileHandler
from pstl_cli.log.logger import PSTLLogger
from tests.utils import path_config


class TestLogging:
    @pytest.fixture
    def model(self) -> Logging:
        return Logging(
            name="test",
            compact=choice([True, False]),
            bars=choice([True, False]),
            formatters={
                "formatter1": {"format": "\\33[92mGreen text\\33[0m normal test: %(message)s"},
                "formatter2": {"format": "normal test \\33[91m Red text\\33[0m: %(message)s"},
            },
            loggers={
                "dev": {"level": "DEBUG"},
                "test": {"level": "INFO"},
                "prod": {"level": "WARNING"},
            }
        )

    def test_gets_logger(self, model: Logging):
        assert model.logger == model.loggers.get(model.name)
        model.name = "I am not a valid logger name"
        assert not model.logger
        model.name = None
        assert not model.logger

    def test_ansi_codes_fixed(self, model: Logging):
        for formatter in model.formatters.values():
            assert "\\33" not in formatter["format"]

    def test_configures_additional_loggers(self, model: Logging):
        assert model.loggers[MODULE_ROOT] == model.logger

        name = "i am an additional logger name"
        model.bind_loggers(name)
        assert name in model.loggers
        assert model.loggers[name] == model.logger

    def test_apply(self, model: Logging):
        model.apply()

        assert PSTLLogger.compact is model.compact
        assert PSTLLogger.disable_bars is not model.bars

    def test_stamps_rotating_file_handlers(self, model: Logging, tmp_path: Path):
        model.handlers["rotating_file_handler"] = {
            "class": f"{CurrentTimeRotatingFileHandler.__module__}.{CurrentTimeRotatingFileHandler.__qualname__}",
            "filename": str(tmp_path.joinpath("{}.log")),
            "delay": True,
        }
        dt = datetime.now() - timedelta(days=2)
        model.stamp_file_handlers(dt)
        model.apply()

        # noinspection PyTypeChecker
        rotating_file_handlers: list[CurrentTimeRotatingFileHandler] = [
            handler for name in logging.getHandlerNames()
            if isinstance((handler := logging.getHandlerByName(name)), CurrentTimeRotatingFileHandler)
        ]
        assert rotating_file_handlers
        assert all(handler.dt == dt for handler in rotating_file_handlers)


class TestPaths:
    @pytest.fixture
    def model(self, tmp_path: Path) -> Paths:
        return Paths(base=tmp_path, datasets=Path("path", "to", "data"), pretrain="checkpoints")

    def test_assigns_base_path_on_relative(self, model: Paths, tmp_path: Path):
        assert model.datasets == tmp_path.joinpath("path", "to", "data")
        assert model.pretrain == tmp_path.joinpath("checkpoints")
        assert model.evaluation == tmp_path.joinpath("eval")
        assert model.sweep == tmp_path.joinpath("sweep")

    def test_keeps_path_on_absolute(self, tmp_path: Path):
        model = Paths(base=tmp_path.parent.parent, datasets=tmp_path.joinpath("data"))
        assert model.datasets == tmp_path.joinpath("data")
        assert model.pretrain == tmp_path.parent.parent.joinpath("pretrain")

    def test_removes_empty_directories(self, model: Paths):
        paths = [getattr(model, name) for name in Paths.artifact_dirs] + [model.base]
        for path in paths:
            path.mkdir(parents=True, exist_ok=True)
            assert path.exists()

        kept = model.evaluation.joinpath("linear", "report.yml")
        kept.parent.mkdir(parents=True)
        kept.write_text("accuracy: 1.0")

        model.prune_empty()
        assert not model.datasets.exists()
        assert not model.base.joinpath("path").exists()
        assert not model.pretrain.exists()
        assert kept.exists()

    def test_never_removes_above_base(self, tmp_path: Path):
        model = Paths(base=tmp_path.joinpath("runs"))
        model.datasets.mkdir(parents=True)

        model.prune_empty()
        assert not model.base.exists()
        assert tmp_path.is_dir()


class TestRunConfig:

    @pytest.fixture(scope="class")
    def loaded(self) -> tuple[RunConfig, dict[str, RunConfig]]:
        return RunConfig.from_file(path_config)

    def test_load(self, loaded: tuple[RunConfig, dict[str, RunConfig]]):
        config, _ = loaded

        assert config.seed == 3
        assert config.logging.name == "test"
        assert config.logging.compact
        assert config.paths.datasets == config.paths.base.joinpath("test_data")
        assert config.data.sequences_per_class == 6
        assert config.mask.n_mask == 2
        assert config.encoder.projector_dims == (8, 8, 8)
        assert config.train.base_lr == 0.01
        assert config.eval.partial.counts == (0, 2)
        assert config.eval.linear.weight_decay == 0
        assert config.sweep.grid == {"mask.n_mask": [1, 2], "seed": [3, 4]}

    def test_load_commands(self, loaded: tuple[RunConfig, dict[str, RunConfig]]):
        config, commands = loaded

        assert set(commands) == {"finetune", "semi_eval"}
        assert commands["finetune"].eval.finetune.epochs == 2
        assert commands["finetune"].eval.finetune.lr == config.eval.finetune.lr
        assert commands["semi_eval"].seed == 9
        assert commands["semi_eval"].mask == config.mask
        assert all(command.paths.dt == config.paths.dt for command in commands.values())

    def test_overrides_apply_to_every_command(self):
        config, commands = RunConfig.from_file(path_config, overrides={"seed": 20, "train": {"epochs": 4}})

        assert config.seed == 20
        assert config.train.epochs == 4
        assert config.train.batch_size == 8
        assert commands["semi_eval"].seed == 20
        assert commands["finetune"].train.epochs == 4

    def test_with_overrides(self, loaded: tuple[RunConfig, dict[str, RunConfig]]):
        config, _ = loaded
        updated = config.with_overrides({"mask": {"top_k": 1}, "train": {"mode": "skeletonbt"}})

        assert updated.mask.top_k == 1
        assert str(updated.train.mode) == "skeletonbt"
        assert updated.mask.n_mask == config.mask.n_mask
        assert updated.logging.name == config.logging.name
        assert config.mask.top_k == 2

    @pytest.mark.parametrize("overrides", [
        {"mask": {"n_mask": 9}},
        {"mask": {"top_k": 8}},
        {"eval": {"partial": {"counts": [0, 9]}}},
        {"encoder": {"in_channels": 2}},
        {"data": {"frames": "many"}},
        {"not_a_section": True},
    ], ids=["too many joints", "too many frames", "too many shaded", "channels", "type", "unknown key"])
    def test_invalid_config_fails(self, loaded: tuple[RunConfig, dict[str, RunConfig]], overrides: dict):
        config, _ = loaded
        with pytest.raises(ParserError):
            config.with_overrides(overrides)

    def test_parts_may_shade_beyond_joint_limit_check(self):
        config = RunConfig.from_map({"eval": {"partial": {"mode": "parts", "counts": [0, 4]}}})
        assert config.eval.partial.counts == (0, 4)

    def test_section_hash(self):
        config = RunConfig()
        assert len(config.section_hash("data")) == 10
        assert config.section_hash("data") == RunConfig().section_hash("data")

        changed = config.with_overrides({"train": {"epochs": 20}})
        assert changed.section_hash("data") == config.section_hash("data")
        assert changed.section_hash("train") != config.section_hash("train")

    def test_stage_directories(self, tmp_path: Path):
        config = RunConfig(seed=2, paths=Paths(base=tmp_path))
        assert config.dataset_dir.parent == tmp_path.joinpath("data")
        assert config.dataset_dir.name.endswith("-seed2")
        assert config.eval_dir("linear").name == "linear"

        trained = config.with_overrides({"train": {"base_lr": 0.1}})
        assert trained.dataset_dir == config.dataset_dir
        assert trained.pretrain_dir != config.pretrain_dir

        evaluated = config.with_overrides({"eval": {"linear": {"epochs": 1}}})
        assert evaluated.pretrain_dir == config.pretrain_dir
        assert evaluated.eval_dir("linear") != config.eval_dir("linear")

    def test_save_yaml(self, loaded: tuple[RunConfig, dict[str, RunConfig]], tmp_path: Path):
        config, _ = loaded
        path = config.save_yaml(tmp_path.joinpath("out"))

        with path.open("r", encoding="utf-8") as file:
            saved = yaml.safe_load(file)
        assert "logging" not in saved
        assert saved["seed"] == 3
        assert saved["encoder"]["projector_dims"] == [8, 8, 8]
        assert saved == json.loads(config.model_dump_json(exclude={"logging"}))
