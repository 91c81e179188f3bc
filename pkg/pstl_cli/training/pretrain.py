"""
Self-supervised pretraining loops.

SkeletonBT pulls two augmented views of each sequence together.
PSTL adds a spatially masked and a temporally masked stream, each compared against an unmasked anchor.
"""
import csv
import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pstl_cli.augment import ordinary_augment
from pstl_cli.config.pipeline import AugmentConfig, LossConfig, MaskConfig, PretrainMode, TrainConfig
from pstl_cli.exception import InvalidInputError
from pstl_cli.log.logger import PSTLLogger
from pstl_cli.loss import bt_loss, cross_correlation, pstl_loss
from pstl_cli.masking import (
    apply_spatial_mask,
    apply_temporal_mask,
    mask_probabilities,
    restrict_topology,
    sample_spatial_mask,
    sample_temporal_mask,
)
from pstl_cli.model import EncoderState, encode, normalize_adjacency, project
from pstl_cli.numerics import AdamState, Tensor, adam_step
from pstl_cli.skeleton import GraphTopology, Modality, SkeletonSequence, to_modality
from pstl_cli.training.schedule import lr_at

LOGGER: PSTLLogger = logging.getLogger(__name__)

TELEMETRY_COLUMNS = ("step", "L_p", "L_1", "L_2", "lr")


@dataclass(frozen=True)
class StepLoss:
    """The losses of one optimisation step and the learning rate it used."""
    step: int
    total: float
    spatial: float
    temporal: float
    lr: float

    def as_row(self) -> tuple[int, float, float, float, float]:
        return self.step, self.total, self.spatial, self.temporal, self.lr


@dataclass
class Views:
    """
    The encoder inputs of one batch.

    :param anchor: Unmasked augmented batch ``[B, C, T, V]``.
    :param spatial: Spatially masked batch ``[B, C, T, V']`` or None when the stream is off.
    :param spatial_adjacency: Per-sequence normalised adjacency ``[B, V', V']`` of the spatial stream.
    :param temporal: Temporally masked batch ``[B, C, T', V]`` or None when the stream is off.
    """
    anchor: np.ndarray
    spatial: np.ndarray | None = None
    spatial_adjacency: np.ndarray | None = None
    temporal: np.ndarray | None = None


@dataclass
class TrainRun:
    """
    Everything a pretraining run owns.

    :param state: The shared encoder and projector.
    :param optimiser: Adam moment estimates for every parameter of ``state``.
    :param rng: The generator driving batching, augmentation and masking.
    :param history: The losses of every step taken so far, in step order.
    """
    state: EncoderState
    optimiser: AdamState
    rng: np.random.Generator
    history: list[StepLoss] = field(default_factory=list)

    @property
    def step(self) -> int:
        return self.optimiser.step


def training_sequences(
        sequences: Sequence[SkeletonSequence], topology: GraphTopology, modality: Modality | str
) -> list[SkeletonSequence]:
    """Convert ``sequences`` to float64 streams of the given ``modality``"""
    return [
        to_modality(seq.with_data(seq.data.astype(np.float64)), topology, modality) for seq in sequences
    ]


class Pretrainer:
    """
    Runs self-supervised pretraining of one encoder.

    :param topology: The skeleton graph of every sequence.
    :param train: Optimisation settings, including the pretraining mode and input modality.
    :param augment: Ordinary augmentation settings.
    :param mask: Spatial and temporal masking settings. Ignored in SkeletonBT mode.
    :param loss: Cross-correlation and loss settings.
    """

    def __init__(
            self,
            topology: GraphTopology,
            train: TrainConfig,
            augment: AugmentConfig,
            mask: MaskConfig,
            loss: LossConfig,
    ):
        self.topology = topology
        self.train = train
        self.augment = augment
        self.mask = mask
        self.loss = loss

        self.adjacency = normalize_adjacency(topology)
        self.probabilities = mask_probabilities(topology, mask.spatial_strategy)
        self._restricted: dict[tuple[int, ...], np.ndarray] = {}

    @property
    def spatial_augment(self) -> bool:
        """Whether shear and rotation apply to the configured input modality"""
        return self.augment.spatial_on_derived or self.train.modality == Modality.JOINT

    def start(self, state: EncoderState, seed: int | np.random.SeedSequence) -> TrainRun:
        """A fresh run over ``state`` seeded with ``seed``"""
        return TrainRun(state=state.train(), optimiser=AdamState.for_parameters(state.parameters),
                        rng=np.random.default_rng(seed))

    ###########################################################################
    ## Views
    ###########################################################################
    def _augment(self, seq: SkeletonSequence, rng: np.random.Generator) -> SkeletonSequence:
        return ordinary_augment(seq, self.topology, self.augment, rng, spatial=self.spatial_augment)

    def restricted_adjacency(self, masked_joints: tuple[int, ...]) -> np.ndarray:
        """The normalised adjacency of the graph left after removing ``masked_joints``"""
        if masked_joints not in self._restricted:
            restricted, _ = restrict_topology(self.topology, masked_joints)
            self._restricted[masked_joints] = normalize_adjacency(restricted)
        return self._restricted[masked_joints]

    def views_skeletonbt(self, batch: Sequence[SkeletonSequence], rng: np.random.Generator) -> Views:
        """Two independently augmented views of every sequence. The second is stored as the temporal stream."""
        first, second = [], []
        for seq in batch:
            first.append(self._augment(seq, rng).data)
            second.append(self._augment(seq, rng).data)
        return Views(anchor=np.stack(first), temporal=np.stack(second))

    def views_pstl(self, batch: Sequence[SkeletonSequence], rng: np.random.Generator) -> Views:
        """
        An anchor, a spatially masked and a temporally masked view of every sequence.
        Masks are drawn afresh for every sequence.
        """
        anchors, spatial, adjacency, temporal = [], [], [], []
        for seq in batch:
            anchors.append(self._augment(seq, rng).data)

            if self.mask.spatial_stream:
                view = self._augment(seq, rng)
                plan = sample_spatial_mask(self.probabilities, self.mask.n_mask, rng)
                spatial.append(apply_spatial_mask(view, plan.masked_joints).data)
                adjacency.append(self.restricted_adjacency(plan.masked_joints))

            if self.mask.temporal_stream:
                view = self._augment(seq, rng)
                plan = sample_temporal_mask(view, self.mask.top_k, rng, self.mask.temporal_strategy)
                temporal.append(apply_temporal_mask(view, plan).data)

        return Views(
            anchor=np.stack(anchors),
            spatial=np.stack(spatial) if spatial else None,
            spatial_adjacency=np.stack(adjacency) if adjacency else None,
            temporal=np.stack(temporal) if temporal else None,
        )

    def views(self, batch: Sequence[SkeletonSequence], rng: np.random.Generator) -> Views:
        """Build the views for the configured mode"""
        if len(batch) < 2:
            raise InvalidInputError(f"A pretraining batch needs at least 2 sequences, got {len(batch)}")
        if self.train.mode == PretrainMode.SKELETONBT:
            return self.views_skeletonbt(batch, rng)
        return self.views_pstl(batch, rng)

    ###########################################################################
    ## Loss
    ###########################################################################
    def _embed(self, state: EncoderState, x: np.ndarray, adjacency: np.ndarray) -> Tensor:
        return project(state, encode(state, x, adjacency))

    def compute_loss(self, state: EncoderState, views: Views) -> tuple[Tensor, Tensor, Tensor]:
        """
        The loss triple ``(L_p, L_1, L_2)`` of prepared ``views``.

        In SkeletonBT mode the single loss is reported as both ``L_p`` and ``L_1`` and ``L_2`` is zero.
        """
        z_anchor = self._embed(state, views.anchor, self.adjacency)

        if self.train.mode == PretrainMode.SKELETONBT:
            z_other = self._embed(state, views.temporal, self.adjacency)
            loss = bt_loss(cross_correlation(z_anchor, z_other, self.loss), self.loss.redundancy_weight)
            return loss, loss, Tensor(0.0)

        z_spatial = None
        if views.spatial is not None:
            z_spatial = self._embed(state, views.spatial, views.spatial_adjacency)
        z_temporal = None
        if views.temporal is not None:
            z_temporal = self._embed(state, views.temporal, self.adjacency)
        return pstl_loss(z_anchor, z_spatial, z_temporal, self.loss)

    ###########################################################################
    ## Optimisation
    ###########################################################################
    def step(self, run: TrainRun, batch: Sequence[SkeletonSequence], lr: float) -> StepLoss:
        """
        One optimisation step on ``batch``: build views, compute the loss, backpropagate and update with Adam.
        """
        views = self.views(batch, run.rng)

        run.state.zero_grad()
        total, spatial, temporal = self.compute_loss(run.state, views)
        total.backward()

        optimiser = self.train.optimiser
        adam_step(
            run.optimiser,
            run.state.parameters,
            run.state.grads(),
            lr=lr,
            weight_decay=self.train.weight_decay,
            beta1=optimiser.beta1,
            beta2=optimiser.beta2,
            eps=optimiser.epsilon,
        )

        result = StepLoss(
            step=run.step, total=total.item(), spatial=spatial.item(), temporal=temporal.item(), lr=lr
        )
        run.history.append(result)
        return result

    def step_pstl(self, run: TrainRun, batch: Sequence[SkeletonSequence], lr: float) -> StepLoss:
        """One triple-stream step regardless of the configured mode"""
        if self.train.mode != PretrainMode.PSTL:
            raise InvalidInputError(f"Trainer is configured for {self.train.mode}, not {PretrainMode.PSTL}")
        return self.step(run, batch, lr)

    def step_skeletonbt(self, run: TrainRun, batch: Sequence[SkeletonSequence], lr: float) -> StepLoss:
        """One double-stream step regardless of the configured mode"""
        if self.train.mode != PretrainMode.SKELETONBT:
            raise InvalidInputError(f"Trainer is configured for {self.train.mode}, not {PretrainMode.SKELETONBT}")
        return self.step(run, batch, lr)

    def _schedule(self, run: TrainRun, num_sequences: int) -> Iterator[tuple[float, np.ndarray]]:
        """Yield ``(fractional epoch, batch indices)`` for every step, dropping incomplete batches"""
        steps_per_epoch = num_sequences // self.train.batch_size
        for epoch in range(self.train.epochs):
            order = run.rng.permutation(num_sequences)
            for i in range(steps_per_epoch):
                yield epoch + i / steps_per_epoch, order[i * self.train.batch_size:(i + 1) * self.train.batch_size]

    def total_steps(self, num_sequences: int) -> int:
        """The number of steps :py:meth:`fit` takes over ``num_sequences`` training sequences"""
        steps = self.train.epochs * (num_sequences // self.train.batch_size)
        return min(steps, self.train.max_steps) if self.train.max_steps else steps

    def fit(self, run: TrainRun, sequences: Sequence[SkeletonSequence]) -> TrainRun:
        """
        Pretrain for the configured number of epochs or until ``max_steps`` is reached.

        :param run: The run to continue.
        :param sequences: Training sequences already converted to the configured modality.
        :raise InvalidInputError: When there are fewer sequences than one batch.
        """
        if len(sequences) < self.train.batch_size:
            raise InvalidInputError(
                f"Batch size {self.train.batch_size} exceeds the {len(sequences)} training sequences"
            )

        total = self.total_steps(len(sequences))
        LOGGER.info(f"Pretraining {self.train.mode} on {self.train.modality} stream for {total} steps")

        schedule = self._schedule(run, len(sequences))
        for _ in LOGGER.get_iterator(range(total), desc="Pretraining", unit="steps"):
            epoch, indices = next(schedule)
            lr = lr_at(epoch, self.train)
            result = self.step(run, [sequences[i] for i in indices], lr)
            LOGGER.stat(
                f"Step {result.step:>6} | epoch {epoch:>7.3f} | lr {lr:.3e} | "
                f"L_p {result.total:.5f} | L_1 {result.spatial:.5f} | L_2 {result.temporal:.5f}"
            )

        if run.history:
            LOGGER.info(f"Pretraining finished after {run.step} steps with L_p {run.history[-1].total:.5f}")
        return run


def write_telemetry(history: Sequence[StepLoss], path: str | Path) -> Path:
    """Write the per-step losses as CSV with columns :py:data:`TELEMETRY_COLUMNS`"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file)
        writer.writerow(TELEMETRY_COLUMNS)
        writer.writerows(loss.as_row() for loss in history)
    return path


def read_telemetry(path: str | Path) -> list[StepLoss]:
    """Read per-step losses written by :py:func:`write_telemetry`"""
    with open(path, "r", newline="", encoding="utf-8") as file:
        return [
            StepLoss(
                step=int(row["step"]),
                total=float(row["L_p"]),
                spatial=float(row["L_1"]),
                temporal=float(row["L_2"]),
                lr=float(row["lr"]),
            )
            for row in csv.DictReader(file)
        ]
