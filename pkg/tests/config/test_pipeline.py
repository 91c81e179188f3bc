import pytest
from pydantic import ValidationError

from pstl_cli.config.pipeline import AugmentConfig, DataConfig, EncoderConfig, MaskConfig, OptimiserConfig, \
    SemiConfig, TrainConfig, SpatialStrategy
from pstl_cli.numerics.optim import adam_step
from pstl_cli.config.operations.signature import get_default_args


def test_data_config():
    assert DataConfig().layout == "compact10"
    assert DataConfig(layout="ntu25").layout == "ntu25"

    with pytest.raises(ValidationError):
        DataConfig(layout="i am not a layout")
    with pytest.raises(ValidationError):
        DataConfig(test_fraction=1)
    with pytest.raises(ValidationError):
        DataConfig(num_classes=1)


def test_sections_reject_unknown_keys():
    with pytest.raises(ValidationError):
        AugmentConfig(shear=0.5)
    with pytest.raises(ValidationError):
        MaskConfig(n_mask=2, unknown=True)


def test_augment_config():
    config = AugmentConfig()
    assert config.shear_amplitude == 1.0
    assert config.crop_pad_ratio == pytest.approx(1 / 6)
    assert config.flip_probability == 0.5

    with pytest.raises(ValidationError):
        AugmentConfig(flip_probability=1.5)
    with pytest.raises(ValidationError):
        config.shear_amplitude = -1


def test_mask_config():
    config = MaskConfig(spatial_strategy="random")
    assert config.spatial_strategy == SpatialStrategy.RANDOM

    MaskConfig(spatial_stream=False)
    MaskConfig(temporal_stream=False)
    with pytest.raises(ValidationError):
        MaskConfig(spatial_stream=False, temporal_stream=False)


def test_encoder_config():
    config = EncoderConfig(projector_dims=(16, 16, 32))
    assert config.embedding_dim == 32

    with pytest.raises(ValidationError):
        EncoderConfig(temporal_kernel_size=4)
    with pytest.raises(ValidationError):
        EncoderConfig(projector_dims=(16, 16))


def test_train_config():
    config = TrainConfig(mode="skeletonbt", modality="B")
    assert str(config.mode) == "skeletonbt"
    assert str(config.modality) == "B"

    with pytest.raises(ValidationError):
        TrainConfig(epochs=10, warmup_epochs=10)
    with pytest.raises(ValidationError):
        TrainConfig(batch_size=1)
    with pytest.raises(ValidationError):
        TrainConfig(mode="simclr")


def test_optimiser_defaults_follow_adam():
    defaults = get_default_args(adam_step)
    config = OptimiserConfig()
    assert (config.beta1, config.beta2, config.epsilon) == (defaults["beta1"], defaults["beta2"], defaults["eps"])


def test_semi_config():
    assert SemiConfig().fractions == (0.01, 0.10)
    with pytest.raises(ValidationError):
        SemiConfig(fractions=(0.5, 0))
    with pytest.raises(ValidationError):
        SemiConfig(fractions=(1.1,))
