"""
The processor for meta operations for the entire program.

This is where functions that can be called via the CLI are defined as 'command methods'.
"""
from __future__ import annotations

import logging
import sys
from collections.abc import Callable
from datetime import datetime
from pathlib import Path
from time import perf_counter
from typing import Any

import numpy as np
import yaml

from pstl_cli.config.core import Paths, RunConfig
from pstl_cli.config.pipeline import DataConfig, MaskConfig, PretrainMode, TrainConfig
from pstl_cli.evaluation import EvalReport, EvalResult, finetune_eval, fuse_streams, linear_eval, \
    partial_body_eval, semi_supervised_eval, write_reports
from pstl_cli.exception import MissingInputError
from pstl_cli.log.logger import PSTLLogger, STAT
from pstl_cli.manager._dynamic import DynamicProcessor, commandmethod
from pstl_cli.model import EncoderState, check_compatible, load_checkpoint, save_checkpoint
from pstl_cli.numerics import GradCheckReport, grad_check
from pstl_cli.skeleton import Dataset, Modality, Split, load_dataset, save_dataset
from pstl_cli.skeleton.dataset import class_counts
from pstl_cli.skeleton.synthetic import generate_synthetic
from pstl_cli.training import Pretrainer, training_sequences, write_telemetry

DATASET_FILE = "dataset.yml"
CHECKPOINT_FILE = "checkpoint.yml"
TELEMETRY_FILE = "telemetry.csv"


class PSTLProcessor(DynamicProcessor):
    """
    Runs every stage of the pipeline, configured from a given ``config``.
    Every command reads its inputs from and writes its outputs to the run directories the config names.
    """

    @property
    def time_taken(self) -> float:
        """The total time taken since initialisation"""
        return perf_counter() - self._start_time

    @property
    def execution_dt(self) -> datetime:
        """The timestamp of when the program was executed."""
        return self.config.paths.dt

    @property
    def paths(self) -> Paths:
        """The configuration for this execution's paths"""
        return self.config.paths

    @property
    def seed(self) -> int:
        return self.config.seed

    def __init__(self, config: RunConfig, handle_exceptions: bool = True):
        super().__init__()
        self._start_time = perf_counter()

        # noinspection PyTypeChecker
        self.logger: PSTLLogger = logging.getLogger(__name__)
        if handle_exceptions:
            sys.excepthook = self._handle_exception

        self.config = config
        self._dump_config("Base")

        self.logger.debug(f"{self.__class__.__name__} initialised. Time taken: {self.time_taken:.3f}")

    def run(self) -> Any:
        """Run the selected command."""
        self.logger.debug(f"Called processor '{self._processor_name}': START")
        result = self()
        self.logger.debug(f"Called processor '{self._processor_name}': DONE")
        return result

    def set_processor(self, name: str, config: RunConfig = None) -> Callable[[], Any]:
        """Set the processor to use from the given name"""
        self._set_processor_name(name)

        if config is not None:
            self.config = config
            self._dump_config(name)

        return self._processor_method

    def _dump_config(self, name: str = None) -> None:
        self.logger.debug(f"{self.get_func_log_name(name)} config:\n" + self.config.model_dump_yaml())

    def _handle_exception(self, exc_type, exc_value, exc_traceback) -> None:
        """Custom exception handler. Handles exceptions through logger."""
        if issubclass(exc_type, KeyboardInterrupt):
            sys.__excepthook__(exc_type, exc_value, exc_traceback)
            return

        self.logger.critical(
            "CRITICAL ERROR: Uncaught Exception", exc_info=(exc_type, exc_value, exc_traceback)
        )

    def get_func_log_name(self, name: str = None) -> str:
        """Formats the given ``name`` to be appropriate for logging"""
        if not name:
            name = self._processor_name or ""

        return name.replace("_", " ").replace("-", " ").title()

    ###########################################################################
    ## Artifacts
    ###########################################################################
    def _seeds(self) -> tuple[int, int]:
        """Seeds for encoder initialisation and for the training run, both derived from the config seed"""
        init_seed, train_seed = np.random.SeedSequence(self.seed).generate_state(2)
        return int(init_seed), int(train_seed)

    def load_dataset(self) -> Dataset:
        """
        Load the dataset generated for the current config.

        :raise MissingInputError: When 'gen-data' has not been run for this config.
        """
        path = self.config.dataset_dir.joinpath(DATASET_FILE)
        if not path.is_file():
            raise MissingInputError(f"No dataset at {path}. Run 'gen-data' with the same config and seed first")
        return load_dataset(path)

    def load_checkpoint(self) -> tuple[EncoderState, Modality]:
        """
        Load the checkpoint pretrained with the current config and the modality it was trained on.

        :raise MissingInputError: When 'pretrain' has not been run for this config.
        :raise CheckpointMismatchError: When the checkpoint does not match the configured encoder.
        """
        path = self.config.pretrain_dir.joinpath(CHECKPOINT_FILE)
        if not path.is_file():
            raise MissingInputError(f"No checkpoint at {path}. Run 'pretrain' with the same config and seed first")

        state, metadata = load_checkpoint(path)
        check_compatible(state, num_channels=3, config=self.config.encoder)
        modality = Modality(metadata.get("modality", self.config.train.modality))
        self.logger.debug(f"Loaded checkpoint pretrained with {metadata.get("mode")} on {modality} stream")
        return state, modality

    def _save_results(self, protocol: str, results: list[EvalResult], names: list[str] | None = None) -> Path:
        folder = self.config.eval_dir(protocol)
        names = names or ["report"] * len(results)
        for result, name in zip(results, names):
            result.save(folder, name=name)
        write_reports([result.report for result in results], folder.joinpath("reports.csv"))
        self.config.save_yaml(folder)
        self.logger.info(f"\33[92mSaved {protocol} results to {folder} \33[0m")
        return folder

    ###########################################################################
    ## Data and pretraining
    ###########################################################################
    @commandmethod
    def gen_data(self) -> Dataset:
        """Generate the synthetic skeleton dataset"""
        dataset = generate_synthetic(self.config.data, seed=self.seed)
        folder = self.config.dataset_dir
        save_dataset(dataset, folder.joinpath(DATASET_FILE))
        self.config.save_yaml(folder)

        counts = {split: len(dataset.indices(split)) for split in Split}
        self.logger.info(
            f"\33[92mGenerated {len(dataset)} sequences "
            f"({counts[Split.TRAIN]} train / {counts[Split.TEST]} test) to {folder} \33[0m"
        )
        self.logger.debug(f"Sequences per class: {class_counts(dataset.labels, dataset.num_classes).tolist()}")
        return dataset

    @commandmethod
    def pretrain(self) -> EncoderState:
        """Pretrain an encoder on the training split with the configured self-supervised mode"""
        dataset = self.load_dataset()
        train = self.config.train
        init_seed, train_seed = self._seeds()

        trainer = Pretrainer(
            topology=dataset.topology,
            train=train,
            augment=self.config.augment,
            mask=self.config.mask,
            loss=self.config.loss,
        )
        state = EncoderState.initialise(self.config.encoder, seed=init_seed)
        run = trainer.start(state, seed=train_seed)
        sequences = training_sequences(dataset.subset(Split.TRAIN), dataset.topology, train.modality)

        trainer.fit(run, sequences)
        self.logger.print_line(STAT)

        folder = self.config.pretrain_dir
        metadata = {"mode": str(train.mode), "modality": str(train.modality), "steps": run.step, "seed": self.seed}
        save_checkpoint(run.state.eval(), folder.joinpath(CHECKPOINT_FILE), metadata=metadata)
        write_telemetry(run.history, folder.joinpath(TELEMETRY_FILE))
        self.config.save_yaml(folder)

        self.logger.info(f"\33[92mSaved checkpoint after {run.step} steps to {folder} \33[0m")
        return run.state

    ###########################################################################
    ## Evaluation
    ###########################################################################
    @commandmethod
    def linear_eval(self) -> list[EvalReport]:
        """Train a linear classifier on the frozen pretrained encoder"""
        dataset = self.load_dataset()
        state, modality = self.load_checkpoint()

        result = linear_eval(state, dataset, modality, self.config.eval.linear, seed=self.seed)
        self._save_results("linear", [result])
        return [result.report]

    @commandmethod
    def partial_eval(self) -> list[EvalReport]:
        """Linear evaluation with random joints or body parts removed from every test sequence"""
        dataset = self.load_dataset()
        state, modality = self.load_checkpoint()
        partial = self.config.eval.partial

        results = partial_body_eval(
            state, dataset, modality, self.config.eval.linear, mode=partial.mode, counts=partial.counts, seed=self.seed
        )
        self._save_results(f"partial-{partial.mode}", results, names=[f"shaded_{n}" for n in partial.counts])
        return [result.report for result in results]

    @commandmethod
    def finetune(self) -> list[EvalReport]:
        """Train a classifier together with every parameter of the pretrained encoder"""
        dataset = self.load_dataset()
        state, modality = self.load_checkpoint()

        result = finetune_eval(state, dataset, modality, self.config.eval.finetune, seed=self.seed)
        self._save_results("finetune", [result])
        return [result.report]

    @commandmethod
    def semi_eval(self) -> list[EvalReport]:
        """Finetune with only a fraction of the training labels"""
        dataset = self.load_dataset()
        state, modality = self.load_checkpoint()
        fractions = self.config.eval.semi.fractions

        results = [
            semi_supervised_eval(state, dataset, modality, self.config.eval.finetune, fraction=f, seed=self.seed)
            for f in fractions
        ]
        self._save_results("semi", results, names=[f"fraction_{f:g}" for f in fractions])
        return [result.report for result in results]

    @commandmethod
    def fuse(self) -> list[EvalReport]:
        """Fuse the test scores of encoders pretrained on the joint, motion and bone streams"""
        fuse = self.config.eval.fuse

        streams = {}
        for modality in fuse.modalities:
            config = self.config.with_overrides({"train": {"modality": str(modality)}})
            streams[str(modality)] = EvalResult.load_logits(config.eval_dir(fuse.protocol))

        result = fuse_streams(streams, seed=self.seed)
        self._save_results(f"fuse-{fuse.protocol}", [result])
        return [result.report]

    ###########################################################################
    ## Diagnostics
    ###########################################################################
    @commandmethod
    def grad_check(self) -> list[GradCheckReport]:
        """Compare analytic gradients of both pretraining losses against finite differences"""
        check = self.config.gradcheck
        data = DataConfig(
            layout=self.config.data.layout, num_classes=2, sequences_per_class=check.batch_size, frames=check.frames
        )
        dataset = generate_synthetic(data, seed=self.seed)
        batch = training_sequences(dataset.sequences[:check.batch_size], dataset.topology, Modality.JOINT)
        mask = MaskConfig(n_mask=check.n_mask, top_k=check.top_k)

        reports = []
        folder = self.config.eval_dir("gradcheck")
        for mode in PretrainMode:
            trainer = Pretrainer(
                topology=dataset.topology,
                train=TrainConfig(mode=mode, batch_size=check.batch_size),
                augment=self.config.augment,
                mask=mask,
                loss=self.config.loss,
            )
            state = EncoderState.initialise(check.encoder, seed=self.seed)
            views = trainer.views(batch, np.random.default_rng(self.seed))

            report = grad_check(
                lambda: trainer.compute_loss(state, views)[0],
                state.parameters,
                epsilon=check.epsilon,
                tolerance=check.tolerance,
                relative_floor=check.relative_floor,
            )
            self.logger.report(
                f"Gradient check {mode}: max relative error {report.max_error:.3e} over "
                f"{len(report.errors)} tensors ({'passed' if report.passed else 'FAILED'})"
            )
            folder.mkdir(parents=True, exist_ok=True)
            with open(folder.joinpath(f"{mode}.yml"), "w", encoding="utf-8") as file:
                yaml.safe_dump(report.as_dict(), file, sort_keys=False)
            reports.append(report)

        self.logger.info(f"\33[92mMax relative error: {max(r.max_error for r in reports):.3e} \33[0m")
        for report in reports:
            report.raise_for_failure()
        return reports

    @commandmethod
    def sweep(self) -> Path:
        """Run the configured commands for every point of the sweep grid and tabulate the reports"""
        from pstl_cli.manager.sweep import run_sweep
        return run_sweep(self.config)
