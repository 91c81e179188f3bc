"""
Learning rate schedule: linear warmup followed by cosine annealing to zero.
"""
import numpy as np

from pstl_cli.config.pipeline import TrainConfig
from pstl_cli.exception import InvalidInputError


def cosine_lr(epoch: float, epochs: int, base_lr: float, warmup_epochs: int = 0) -> float:
    """
    The learning rate at a (fractional) ``epoch`` of a schedule lasting ``epochs``.

    Ramps linearly from 0 to ``base_lr`` over ``warmup_epochs``,
    then follows ``base_lr * (1 + cos(pi * (epoch - warmup) / (epochs - warmup))) / 2``.

    :raise InvalidInputError: When ``epoch`` lies outside ``[0, epochs)``.
    """
    if not 0 <= epoch < epochs:
        raise InvalidInputError(f"Epoch {epoch} outside of the schedule [0, {epochs})")

    if epoch < warmup_epochs:
        return base_lr * epoch / warmup_epochs

    progress = (epoch - warmup_epochs) / (epochs - warmup_epochs)
    return float(base_lr * 0.5 * (1 + np.cos(np.pi * progress)))


def lr_at(epoch: float, config: TrainConfig) -> float:
    """The pretraining learning rate at a (fractional) ``epoch``. See :py:func:`cosine_lr`."""
    return cosine_lr(epoch, epochs=config.epochs, base_lr=config.base_lr, warmup_epochs=config.warmup_epochs)
