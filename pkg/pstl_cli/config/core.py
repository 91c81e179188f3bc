"""
Meta config for the entire application.

Stores config for every pipeline stage, as well as defining other key runtime configuration.
"""
import hashlib
import json
import logging.config
from collections.abc import Mapping
from copy import deepcopy
from datetime import datetime
from pathlib import Path
from typing import Any, ClassVar, Literal, Self

import yaml
from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, ValidationError, model_validator

from pstl_cli import MODULE_ROOT, PACKAGE_ROOT
from pstl_cli.config.loader import MultiFileLoader
from pstl_cli.config.pipeline import AugmentConfig, DataConfig, EncoderConfig, EvalConfig, GradCheckConfig, \
    LossConfig, MaskConfig, PartialMode, SweepConfig, TrainConfig
from pstl_cli.exception import ParserError
from pstl_cli.log.handlers import CurrentTimeRotatingFileHandler
from pstl_cli.log.logger import PSTLLogger
from pstl_cli.skeleton.topology import LAYOUTS
from pstl_cli.utils import merge_maps


###########################################################################
## Runtime
###########################################################################
#: The keys of the schema accepted by :py:func:`logging.config.dictConfig`.
DICT_CONFIG_KEYS = frozenset({
    "version", "formatters", "filters", "handlers", "loggers", "root", "incremental", "disable_existing_loggers"
})


class Logging(BaseModel):
    """
    Runtime logging settings: a :py:func:`logging.config.dictConfig` schema plus the name of the logger to run with.
    """
    version: Literal[1] = Field(description="The dictConfig schema version", default=1)
    formatters: dict[str, Any] = Field(description="Formatter settings by formatter ID", default_factory=dict)
    filters: dict[str, Any] = Field(description="Filter settings by filter ID", default_factory=dict)
    handlers: dict[str, Any] = Field(description="Handler settings by handler ID", default_factory=dict)
    loggers: dict[str, Any] = Field(description="Logger settings by logger name", default_factory=dict)
    root: dict[str, Any] = Field(description="Settings for the root logger", default_factory=dict)
    incremental: bool = Field(description="Apply these settings on top of the current ones", default=False)
    disable_existing_loggers: bool = Field(description="Silence loggers not named in 'loggers'", default=True)

    name: str | None = Field(
        description="The entry of 'loggers' whose settings the package logger takes for this run",
        default=None,
    )
    compact: bool = Field(
        description="Drop the blank lines printed between sections of console output",
        default=False,
    )
    bars: bool = Field(
        description="Show progress bars for pretraining, evaluation and sweeps",
        default=True,
    )

    @property
    def logger(self) -> dict[str, Any]:
        """The settings of the selected logger, or an empty map when none is selected"""
        return self.loggers.get(self.name, {}) if self.name else {}

    @model_validator(mode="after")
    def decode_ansi_escapes(self) -> Self:
        """Turn the escaped ANSI codes YAML leaves in formats into real escape characters"""
        for formatter in self.formatters.values():
            if "format" in formatter:
                formatter["format"] = formatter["format"].replace(r"\33", "\33")
        return self

    @model_validator(mode="after")
    def bind_package_logger(self) -> Self:
        """Give the package logger the settings of the selected logger"""
        if self.logger:
            self.bind_loggers(MODULE_ROOT)
        return self

    def bind_loggers(self, *names: str) -> None:
        """Give the loggers with the given ``names`` the settings of the selected logger"""
        self.loggers.update({name: self.logger for name in names})

    def stamp_file_handlers(self, dt: datetime | None = None) -> None:
        """Name every :py:class:`.CurrentTimeRotatingFileHandler` log after the execution time ``dt``"""
        for handler in self.handlers.values():
            if handler.get("class", "").endswith(CurrentTimeRotatingFileHandler.__name__):
                handler["dt"] = dt

    def apply(self) -> None:
        """Configure the logger class and, when any handlers are configured, the logging module"""
        PSTLLogger.compact = self.compact
        PSTLLogger.disable_bars = not self.bars
        if not self.handlers and not self.root:
            return

        logging.config.dictConfig(self.model_dump(include=set(DICT_CONFIG_KEYS)))
        if self.logger:
            logging.getLogger(MODULE_ROOT).debug(f"Logging config set to: {self.name}")


class Paths(BaseModel):
    base: Path = Field(
        description="The base directory for every artifact: datasets, checkpoints, telemetry, reports",
        default=PACKAGE_ROOT.joinpath("_runs"),
    )
    dt: datetime = Field(
        description="The datetime of the current execution. Names the log file of this run",
        default_factory=datetime.now
    )

    datasets: Path = Field(
        description="The directory for generated datasets. Relative paths resolve against 'base'",
        default=Path("data"),
    )
    pretrain: Path = Field(
        description="The directory for checkpoints and loss telemetry. Relative paths resolve against 'base'",
        default=Path("pretrain"),
    )
    evaluation: Path = Field(
        description="The directory for evaluation reports. Relative paths resolve against 'base'",
        default=Path("eval"),
    )
    sweep: Path = Field(
        description="The directory for sweep tables. Relative paths resolve against 'base'",
        default=Path("sweep"),
    )

    #: The artifact directories, in the order they are produced.
    artifact_dirs: ClassVar[tuple[str, ...]] = ("datasets", "pretrain", "evaluation", "sweep")

    @model_validator(mode="after")
    def resolve_against_base(self) -> Self:
        """Anchor relative artifact directories at 'base'"""
        for name in self.artifact_dirs:
            folder: Path = getattr(self, name)
            if not folder.is_absolute():
                setattr(self, name, self.base.joinpath(folder))
        return self

    def prune_empty(self) -> None:
        """
        Delete every artifact directory holding nothing, then its parents up to and including 'base'
        while they hold nothing either.
        """
        for folder in [*(getattr(self, name) for name in self.artifact_dirs), self.base]:
            while folder.is_dir() and not any(folder.iterdir()):
                folder.rmdir()
                if folder == self.base or not folder.is_relative_to(self.base):
                    break
                folder = folder.parent


###########################################################################
## Run config
###########################################################################
class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: NonNegativeInt = Field(
        description="The seed for data generation, initialisation, augmentation, masking and evaluation",
        default=0,
    )

    # runtime
    logging: Logging = Field(
        description="Configuration for the runtime logger",
        default_factory=Logging,
    )
    paths: Paths = Field(
        description="Configuration for the hierarchy of files written by the program",
        default_factory=Paths,
    )

    # pipeline
    data: DataConfig = Field(
        description="Configuration for synthetic dataset generation",
        default_factory=DataConfig,
    )
    augment: AugmentConfig = Field(
        description="Configuration for the ordinary augmentations applied to every view",
        default_factory=AugmentConfig,
    )
    mask: MaskConfig = Field(
        description="Configuration for spatial and temporal masking of the PSTL streams",
        default_factory=MaskConfig,
    )
    encoder: EncoderConfig = Field(
        description="Configuration for the encoder and projector architecture",
        default_factory=EncoderConfig,
    )
    loss: LossConfig = Field(
        description="Configuration for the redundancy-reduction loss",
        default_factory=LossConfig,
    )
    train: TrainConfig = Field(
        description="Configuration for pretraining",
        default_factory=TrainConfig,
    )
    eval: EvalConfig = Field(
        description="Configuration for the downstream evaluation protocols",
        default_factory=EvalConfig,
    )
    gradcheck: GradCheckConfig = Field(
        description="Configuration for the finite difference gradient check",
        default_factory=GradCheckConfig,
    )
    sweep: SweepConfig = Field(
        description="Configuration for grid sweeps over any config key",
        default_factory=SweepConfig,
    )

    #: The sections each stage's artifacts depend on.
    stage_sections: ClassVar[dict[str, tuple[str, ...]]] = {
        "datasets": ("data",),
        "pretrain": ("data", "augment", "mask", "encoder", "loss", "train"),
        "evaluation": ("data", "augment", "mask", "encoder", "loss", "train", "eval"),
    }

    @model_validator(mode="after")
    def check_stages_are_compatible(self) -> Self:
        """Check the masking and evaluation settings fit the configured skeleton and sequence length"""
        joints = LAYOUTS[self.data.layout]().num_joints
        if self.mask.n_mask > joints - 2:
            raise ParserError(
                f"Cannot mask {self.mask.n_mask} of {joints} joints and keep 2", key="mask.n_mask", value=joints
            )
        if 2 * self.mask.top_k > self.data.frames - 2:
            raise ParserError(
                f"Cannot mask 2 * {self.mask.top_k} of {self.data.frames} frames and keep 2", key="mask.top_k"
            )
        if self.eval.partial.mode == PartialMode.JOINTS and any(n > joints - 2 for n in self.eval.partial.counts):
            raise ParserError(
                f"Cannot shade more than {joints - 2} joints", key="eval.partial.counts", value=self.eval.partial.counts
            )
        if self.encoder.in_channels != 3:
            raise ParserError("Skeleton streams have 3 channels", key="encoder.in_channels", value=self.encoder.in_channels)
        return self

    @classmethod
    def from_map(cls, config_map: Mapping[str, Any]) -> Self:
        """
        Create config from a raw mapping.

        :raise ParserError: When any value is invalid or any key is unknown.
        """
        try:
            return cls(**config_map)
        except ValidationError as ex:
            errors = "; ".join(
                f"{'.'.join(map(str, error['loc']))}: {error['msg']}" for error in ex.errors(include_url=False)
            )
            raise ParserError(f"Invalid config | {errors}") from ex

    @classmethod
    def from_file(
            cls, config_file_path: str | Path, overrides: Mapping[str, Any] | None = None
    ) -> tuple[Self, dict[str, Self]]:
        """
        Create config from the config found in the given ``config_file_path``.

        :param config_file_path: The YAML or JSON file to load.
        :param overrides: Nested values applied on top of the base config and every command's config.
        :return: The base config and the config for every command configured under the 'commands' key.
        """
        config_map = MultiFileLoader.load_mapping(config_file_path)

        commands_map: dict[str, dict[str, Any]] = config_map.pop("commands", None) or {}
        if overrides:
            merge_maps(config_map, deepcopy(dict(overrides)))
        base = cls.from_map(config_map)

        commands: dict[str, Self] = {}
        for name, command_map in commands_map.items():
            conf_map = merge_maps(deepcopy(config_map), deepcopy(command_map or {}))
            if overrides:
                merge_maps(conf_map, deepcopy(dict(overrides)))
            conf_map.setdefault("paths", {})["dt"] = base.paths.dt
            commands[name.replace("-", "_")] = cls.from_map(conf_map)

        return base, commands

    def with_overrides(self, overrides: Mapping[str, Any]) -> Self:
        """A copy of this config with the nested ``overrides`` applied and validated"""
        config_map = json.loads(self.model_dump_json())
        config_map["logging"] = self.logging.model_dump()
        return self.from_map(merge_maps(config_map, deepcopy(dict(overrides))))

    ###########################################################################
    ## Artifact paths
    ###########################################################################
    def section_hash(self, *sections: str) -> str:
        """A 10 character digest of the canonical JSON form of the given ``sections``"""
        data = json.loads(self.model_dump_json(include=set(sections)))
        canonical = json.dumps(data, sort_keys=True)
        return hashlib.md5(canonical.encode("utf-8")).hexdigest()[:10]

    def _stage_dir(self, stage: str) -> Path:
        folder: Path = getattr(self.paths, stage)
        return folder.joinpath(f"{self.section_hash(*self.stage_sections[stage])}-seed{self.seed}")

    @property
    def dataset_dir(self) -> Path:
        """Where the dataset generated from this config lives"""
        return self._stage_dir("datasets")

    @property
    def pretrain_dir(self) -> Path:
        """Where the checkpoint and telemetry of pretraining with this config live"""
        return self._stage_dir("pretrain")

    def eval_dir(self, protocol: str) -> Path:
        """Where the reports of the given evaluation ``protocol`` with this config live"""
        return self._stage_dir("evaluation").joinpath(protocol)

    def model_dump_yaml(self) -> str:
        """Generates a JSON representation of the model using ``yaml.safe_dump``."""
        data = json.loads(self.model_dump_json(exclude={"logging"}))
        return yaml.safe_dump(data, indent=2, default_flow_style=False, allow_unicode=True, sort_keys=False)

    def save_yaml(self, folder: str | Path) -> Path:
        """Echo the effective config into ``folder`` as 'config.yml'"""
        folder = Path(folder)
        folder.mkdir(parents=True, exist_ok=True)
        path = folder.joinpath("config.yml")
        path.write_text(self.model_dump_yaml(), encoding="utf-8")
        return path
