"""
The affine classifier trained on top of encoder features.
"""
import logging
from dataclasses import dataclass
from typing import Self

import numpy as np

from pstl_cli.config.pipeline import ClassifierConfig
from pstl_cli.exception import InvalidInputError, ShapeMismatchError
from pstl_cli.log.logger import PSTLLogger
from pstl_cli.numerics import AdamState, Tensor, adam_step, no_grad
from pstl_cli.numerics import ops
from pstl_cli.training.schedule import cosine_lr

LOGGER: PSTLLogger = logging.getLogger(__name__)


@dataclass
class LinearClassifier:
    """
    Maps features ``[N, c_h]`` to class logits ``[N, classes]``.

    :param weight: Tensor of shape ``[classes, c_h]``.
    :param bias: Tensor of shape ``[classes]``.
    """
    weight: Tensor
    bias: Tensor

    @classmethod
    def initialise(cls, feature_dim: int, num_classes: int, rng: np.random.Generator) -> Self:
        """Weights drawn from ``U(-1/sqrt(c_h), 1/sqrt(c_h))`` and zero biases"""
        bound = 1.0 / np.sqrt(feature_dim)
        return cls(
            weight=Tensor(rng.uniform(-bound, bound, size=(num_classes, feature_dim)), requires_grad=True,
                          name="classifier.weight"),
            bias=Tensor(np.zeros(num_classes), requires_grad=True, name="classifier.bias"),
        )

    @property
    def parameters(self) -> dict[str, Tensor]:
        return {"classifier.weight": self.weight, "classifier.bias": self.bias}

    @property
    def num_classes(self) -> int:
        return self.weight.shape[0]

    def __call__(self, features: Tensor | np.ndarray) -> Tensor:
        features = ops.as_tensor(features)
        if features.ndim != 2 or features.shape[1] != self.weight.shape[1]:
            raise ShapeMismatchError("Features do not match the classifier", features.shape, self.weight.shape)
        return ops.add(ops.matmul(features, ops.transpose(self.weight)), self.bias)

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Class logits of ``features`` without recording gradients"""
        with no_grad():
            return self(features).numpy()


def iterate_batches(num_samples: int, batch_size: int, rng: np.random.Generator, min_size: int = 1):
    """Yield shuffled index batches over ``num_samples``. A final batch smaller than ``min_size`` is dropped."""
    order = rng.permutation(num_samples)
    for start in range(0, num_samples, batch_size):
        indices = order[start:start + batch_size]
        if len(indices) >= min_size:
            yield indices


def fit_classifier(
        features: np.ndarray,
        labels: np.ndarray,
        num_classes: int,
        config: ClassifierConfig,
        rng: np.random.Generator,
) -> LinearClassifier:
    """
    Train a :py:class:`LinearClassifier` on fixed ``features`` with cross-entropy,
    Adam and a cosine learning rate schedule.

    :param features: Array of shape ``[N, c_h]``.
    :param labels: Class ids of shape ``[N]``.
    :param num_classes: The number of logits to produce.
    :param config: Learning rate, epochs, batch size and weight decay.
    :param rng: Drives initialisation and shuffling.
    :raise InvalidInputError: When there are no training samples or a label is out of range.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if not len(labels):
        raise InvalidInputError("Cannot fit a classifier without training samples")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise InvalidInputError(f"Labels must lie in [0, {num_classes})")

    classifier = LinearClassifier.initialise(features.shape[1], num_classes, rng)
    optimiser = AdamState.for_parameters(classifier.parameters)

    batches_per_epoch = -(-len(labels) // config.batch_size)
    for epoch in range(config.epochs):
        for i, indices in enumerate(iterate_batches(len(labels), config.batch_size, rng)):
            lr = cosine_lr(epoch + i / batches_per_epoch, epochs=config.epochs, base_lr=config.lr)
            for param in classifier.parameters.values():
                param.zero_grad()

            loss = ops.cross_entropy(classifier(features[indices]), labels[indices])
            loss.backward()
            adam_step(
                optimiser,
                classifier.parameters,
                {name: param.grad for name, param in classifier.parameters.items()},
                lr=lr,
                weight_decay=config.weight_decay,
            )
        LOGGER.stat(f"Classifier epoch {epoch + 1:>4}/{config.epochs} | loss {loss.item():.5f}")

    return classifier
