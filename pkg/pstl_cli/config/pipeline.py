"""
Config for every stage of the pipeline: data, augmentation, masking, model, loss, training and evaluation.
"""
import math
from enum import StrEnum
from typing import Any, Literal, Self

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, NonNegativeInt, NonNegativeFloat, PositiveFloat, \
    model_validator, field_validator

from pstl_cli.config.operations.signature import get_default_args
from pstl_cli.exception import ParserError
from pstl_cli.numerics.optim import adam_step
from pstl_cli.skeleton.sequence import Modality
from pstl_cli.skeleton.topology import LAYOUTS


class Section(BaseModel):
    """Base model for every config section. Unknown keys are rejected."""
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


###########################################################################
## Data
###########################################################################
class DataConfig(Section):
    layout: str = Field(
        description=f"The skeleton layout to generate sequences for. Accepted layouts: {list(LAYOUTS)}",
        default="compact10",
    )
    num_classes: int = Field(
        description="The number of action categories to generate",
        default=4,
        ge=2,
    )
    sequences_per_class: PositiveInt = Field(
        description="The number of sequences generated for every action category",
        default=75,
    )
    frames: int = Field(
        description="The number of frames every sequence is resized to",
        default=50,
        ge=2,
    )
    noise: NonNegativeFloat = Field(
        description="Standard deviation of gaussian noise added to every coordinate",
        default=0.01,
    )
    test_fraction: float = Field(
        description="The fraction of sequences of every class assigned to the test split",
        default=1 / 3,
        gt=0,
        lt=1,
    )

    @field_validator("layout", mode="after")
    @classmethod
    def check_layout(cls, value: str) -> str:
        """Check the layout is a known one"""
        if value not in LAYOUTS:
            raise ParserError("Unrecognised skeleton layout", key="data.layout", value=value)
        return value


###########################################################################
## Augmentation & masking
###########################################################################
class AugmentConfig(Section):
    shear_amplitude: NonNegativeFloat = Field(
        description="β: every off-diagonal shear factor is drawn uniformly from [-β, β]",
        default=1.0,
    )
    crop_pad_ratio: NonNegativeFloat = Field(
        description="γ: ceil(γT) frames are reflection padded before a random window of T frames is cropped",
        default=1 / 6,
    )
    rotate_main_max: NonNegativeFloat = Field(
        description="Upper bound in radians of the rotation angle around the randomly chosen main axis",
        default=math.pi / 6,
    )
    rotate_minor_max: NonNegativeFloat = Field(
        description="Upper bound in radians of the rotation angles around the two other axes",
        default=math.pi / 180,
    )
    flip_probability: float = Field(
        description="p: the probability of swapping the left and right sides of the body",
        default=0.5,
        ge=0,
        le=1,
    )
    spatial_on_derived: bool = Field(
        description="Apply shear and rotation to motion and bone streams as well as joint coordinates",
        default=True,
    )


class SpatialStrategy(StrEnum):
    CENTRAL = "central"
    RANDOM = "random"


class TemporalStrategy(StrEnum):
    MOTION = "motion"
    RANDOM = "random"


class MaskConfig(Section):
    n_mask: NonNegativeInt = Field(
        description="The number of joints removed from the spatial stream. 9 suits the 25 joint layout",
        default=3,
    )
    top_k: NonNegativeInt = Field(
        description="K: the number of highest-motion frames removed from the temporal stream, "
                    "alongside K more random frames",
        default=10,
    )
    spatial_strategy: SpatialStrategy = Field(
        description="How masked joints are chosen. 'central' weights joints by degree, 'random' draws uniformly",
        default=SpatialStrategy.CENTRAL,
    )
    temporal_strategy: TemporalStrategy = Field(
        description="How masked frames are chosen. 'motion' takes the top-K motion frames plus K random frames, "
                    "'random' draws all 2K frames uniformly",
        default=TemporalStrategy.MOTION,
    )
    spatial_stream: bool = Field(
        description="Train with the spatially masked stream",
        default=True,
    )
    temporal_stream: bool = Field(
        description="Train with the temporally masked stream",
        default=True,
    )

    @model_validator(mode="after")
    def check_streams(self) -> Self:
        """At least one masked stream must be enabled"""
        if not (self.spatial_stream or self.temporal_stream):
            raise ParserError("At least one of the spatial or temporal streams must be enabled", key="mask")
        return self


###########################################################################
## Model & loss
###########################################################################
class EncoderConfig(Section):
    in_channels: PositiveInt = Field(
        description="The number of coordinate channels of the input",
        default=3,
    )
    hidden_channels: PositiveInt = Field(
        description="The number of channels of every graph convolution block",
        default=16,
    )
    num_blocks: PositiveInt = Field(
        description="The number of spatial-temporal graph convolution blocks",
        default=3,
    )
    temporal_kernel_size: PositiveInt = Field(
        description="The odd size of the temporal convolution kernel",
        default=9,
    )
    feature_dim: PositiveInt = Field(
        description="c_h: the dimension of the encoder features",
        default=256,
    )
    projector_dims: tuple[PositiveInt, PositiveInt, PositiveInt] = Field(
        description="The output dimension of each of the 3 projector layers. The last is the embedding dimension c_z",
        default=(6144, 6144, 6144),
    )

    @field_validator("temporal_kernel_size", mode="after")
    @classmethod
    def check_kernel_is_odd(cls, value: int) -> int:
        """Temporal kernels must be odd to keep the frame count"""
        if value % 2 == 0:
            raise ParserError("Temporal kernel size must be odd", key="encoder.temporal_kernel_size", value=value)
        return value

    @property
    def embedding_dim(self) -> int:
        """c_z: the dimension of the projector output"""
        return self.projector_dims[-1]


class LossConfig(Section):
    redundancy_weight: PositiveFloat = Field(
        description="λ: the weight of the off-diagonal redundancy term",
        default=2e-4,
    )
    center_embeddings: bool = Field(
        description="Subtract per-dimension batch means from the embeddings before correlating them",
        default=True,
    )
    epsilon: PositiveFloat = Field(
        description="Stabilises the normalising denominators of the cross-correlation",
        default=1e-9,
    )


###########################################################################
## Training
###########################################################################
class PretrainMode(StrEnum):
    PSTL = "pstl"
    SKELETONBT = "skeletonbt"


adam_defaults = get_default_args(adam_step)


class OptimiserConfig(Section):
    beta1: float = Field(
        description="Decay rate of the first moment estimate",
        default=adam_defaults["beta1"],
        ge=0,
        lt=1,
    )
    beta2: float = Field(
        description="Decay rate of the second moment estimate",
        default=adam_defaults["beta2"],
        ge=0,
        lt=1,
    )
    epsilon: PositiveFloat = Field(
        description="Added to the root of the second moment estimate",
        default=adam_defaults["eps"],
    )


class TrainConfig(Section):
    mode: PretrainMode = Field(
        description="'pstl' trains the anchor, spatial and temporal streams, "
                    "'skeletonbt' trains two plainly augmented views",
        default=PretrainMode.PSTL,
    )
    modality: Modality = Field(
        description="The input stream: J for joints, M for motion, B for bones",
        default=Modality.JOINT,
    )
    epochs: PositiveInt = Field(
        description="The number of passes over the training split",
        default=150,
    )
    warmup_epochs: NonNegativeInt = Field(
        description="The number of epochs the learning rate ramps linearly up to its base value",
        default=10,
    )
    batch_size: int = Field(
        description="The number of sequences in every mini-batch",
        default=128,
        ge=2,
    )
    base_lr: PositiveFloat = Field(
        description="The learning rate reached at the end of the warmup",
        default=1e-3,
    )
    weight_decay: NonNegativeFloat = Field(
        description="Coupled weight decay added to every gradient",
        default=1e-5,
    )
    max_steps: PositiveInt | None = Field(
        description="Stop after this many optimiser steps regardless of the epoch count",
        default=None,
    )
    optimiser: OptimiserConfig = Field(
        description="Adam hyperparameters",
        default_factory=OptimiserConfig,
    )

    @model_validator(mode="after")
    def check_warmup(self) -> Self:
        """The warmup must end before training does"""
        if self.warmup_epochs >= self.epochs:
            raise ParserError(
                "Warmup must be shorter than training: {value}", key="train.warmup_epochs",
                value=f"{self.warmup_epochs} >= {self.epochs}",
            )
        return self


###########################################################################
## Evaluation
###########################################################################
class ClassifierConfig(Section):
    lr: PositiveFloat = Field(
        description="The initial learning rate, annealed with a cosine schedule",
    )
    epochs: NonNegativeInt = Field(
        description="The number of passes over the labelled training data",
    )
    batch_size: int = Field(
        description="The number of sequences in every mini-batch",
        default=64,
        ge=2,
    )
    weight_decay: NonNegativeFloat = Field(
        description="Coupled weight decay added to every gradient",
        default=0.0,
    )


class PartialMode(StrEnum):
    JOINTS = "joints"
    PARTS = "parts"


class PartialConfig(Section):
    mode: PartialMode = Field(
        description="'joints' shades random joints, 'parts' shades every joint of random body parts",
        default=PartialMode.JOINTS,
    )
    counts: tuple[NonNegativeInt, ...] = Field(
        description="The numbers of joints or parts shaded. One report is produced for each",
        default=(0, 1, 2, 3),
    )


class SemiConfig(Section):
    fractions: tuple[float, ...] = Field(
        description="The fractions of labelled training data to finetune with",
        default=(0.01, 0.10),
    )

    @field_validator("fractions", mode="after")
    @classmethod
    def check_fractions(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        """Fractions must lie in (0, 1]"""
        if any(not 0 < fraction <= 1 for fraction in value):
            raise ParserError("Labelled fractions must lie in (0, 1]", key="eval.semi.fractions", value=value)
        return value


class FuseConfig(Section):
    protocol: Literal["linear", "finetune"] = Field(
        description="The protocol whose test logits are fused",
        default="linear",
    )
    modalities: tuple[Modality, ...] = Field(
        description="The streams to fuse",
        default=(Modality.JOINT, Modality.MOTION, Modality.BONE),
    )


class EvalConfig(Section):
    linear: ClassifierConfig = Field(
        description="Linear evaluation on frozen features",
        default_factory=lambda: ClassifierConfig(lr=0.01, epochs=50),
    )
    finetune: ClassifierConfig = Field(
        description="Finetuning the whole network",
        default_factory=lambda: ClassifierConfig(lr=0.005, epochs=20, batch_size=32),
    )
    partial: PartialConfig = Field(
        description="Partial body evaluation",
        default_factory=PartialConfig,
    )
    semi: SemiConfig = Field(
        description="Semi-supervised evaluation",
        default_factory=SemiConfig,
    )
    fuse: FuseConfig = Field(
        description="Fusion of the per-stream results of one protocol",
        default_factory=FuseConfig,
    )


###########################################################################
## Utilities
###########################################################################
class GradCheckConfig(Section):
    epsilon: PositiveFloat = Field(
        description="The central finite difference step",
        default=1e-5,
    )
    tolerance: PositiveFloat = Field(
        description="The maximum accepted relative error",
        default=1e-4,
    )
    relative_floor: PositiveFloat = Field(
        description="Fraction of a tensor's largest gradient below which elements are compared absolutely. "
                    "1 judges every element against that largest gradient",
        default=1.0,
        le=1.0,
    )
    batch_size: int = Field(
        description="The number of sequences in the checked batch",
        default=4,
        ge=2,
    )
    frames: int = Field(
        description="The number of frames of every checked sequence",
        default=12,
        ge=4,
    )
    encoder: EncoderConfig = Field(
        description="The small encoder the loss is checked through",
        default_factory=lambda: EncoderConfig(
            hidden_channels=4, num_blocks=2, temporal_kernel_size=3, feature_dim=6, projector_dims=(8, 8, 8)
        ),
    )
    n_mask: NonNegativeInt = Field(
        description="The number of joints removed from the spatial stream",
        default=2,
    )
    top_k: NonNegativeInt = Field(
        description="The number of key frames removed from the temporal stream",
        default=2,
    )


class SweepConfig(Section):
    grid: dict[str, list[Any]] = Field(
        description="Map of dotted config keys to the values they take. Every combination is one grid point",
        default_factory=dict,
    )
    commands: tuple[str, ...] = Field(
        description="The commands run for every grid point, in order",
        default=("gen-data", "pretrain", "linear-eval"),
    )
    workers: PositiveInt = Field(
        description="The number of processes grid points are run in",
        default=1,
    )
