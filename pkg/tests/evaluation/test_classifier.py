import numpy as np
import pytest

from pstl_cli.config.pipeline import ClassifierConfig
from pstl_cli.evaluation import LinearClassifier, fit_classifier
from pstl_cli.evaluation.classifier import iterate_batches
from pstl_cli.exception import InvalidInputError, ShapeMismatchError


def blobs(rng: np.random.Generator, num_classes: int = 3, per_class: int = 30) -> tuple[np.ndarray, np.ndarray]:
    """Well separated clusters of features, one per class"""
    centres = np.eye(num_classes, 5) * 6
    labels = np.repeat(np.arange(num_classes), per_class)
    return centres[labels] + rng.normal(scale=0.5, size=(len(labels), 5)), labels


class TestLinearClassifier:

    def test_initialise(self, rng: np.random.Generator):
        classifier = LinearClassifier.initialise(feature_dim=16, num_classes=4, rng=rng)
        assert classifier.weight.shape == (4, 16)
        assert classifier.num_classes == 4
        assert np.all(np.abs(classifier.weight.values) <= 0.25)
        assert np.all(classifier.bias.values == 0)
        assert set(classifier.parameters) == {"classifier.weight", "classifier.bias"}

    def test_predict(self, rng: np.random.Generator):
        classifier = LinearClassifier.initialise(feature_dim=3, num_classes=2, rng=rng)
        features = rng.normal(size=(7, 3))
        expected = features @ classifier.weight.values.T + classifier.bias.values
        assert np.allclose(classifier.predict(features), expected)

    def test_mismatched_features_fail(self, rng: np.random.Generator):
        classifier = LinearClassifier.initialise(feature_dim=3, num_classes=2, rng=rng)
        with pytest.raises(ShapeMismatchError):
            classifier(rng.normal(size=(7, 4)))


def test_iterate_batches(rng: np.random.Generator):
    batches = list(iterate_batches(10, 4, rng))
    assert [len(batch) for batch in batches] == [4, 4, 2]
    assert sorted(np.concatenate(batches).tolist()) == list(range(10))

    assert [len(batch) for batch in iterate_batches(9, 4, rng, min_size=2)] == [4, 4]


class TestFitClassifier:

    def test_separates_clusters(self, rng: np.random.Generator):
        features, labels = blobs(rng)
        config = ClassifierConfig(lr=0.05, epochs=30, batch_size=16)
        classifier = fit_classifier(features, labels, num_classes=3, config=config, rng=rng)

        test_features, test_labels = blobs(rng)
        accuracy = np.mean(classifier.predict(test_features).argmax(axis=1) == test_labels)
        assert accuracy >= 0.95

    def test_constant_features_predict_the_majority_class(self, rng: np.random.Generator):
        features = np.full((20, 5), 0.5)
        labels = np.array([0] * 10 + [1] * 5 + [2] * 5)
        config = ClassifierConfig(lr=0.05, epochs=100, batch_size=64)
        classifier = fit_classifier(features, labels, num_classes=3, config=config, rng=rng)

        assert np.all(classifier.predict(features).argmax(axis=1) == 0)

    def test_unrelated_labels_give_chance_accuracy(self, rng: np.random.Generator):
        config = ClassifierConfig(lr=0.05, epochs=20, batch_size=32)
        features, labels = rng.normal(size=(300, 5)), rng.integers(0, 3, size=300)
        classifier = fit_classifier(features, labels, num_classes=3, config=config, rng=rng)

        test_features, test_labels = rng.normal(size=(3000, 5)), rng.integers(0, 3, size=3000)
        accuracy = np.mean(classifier.predict(test_features).argmax(axis=1) == test_labels)
        assert abs(accuracy - 1 / 3) <= 0.05

    def test_deterministic(self):
        features, labels = blobs(np.random.default_rng(0))
        config = ClassifierConfig(lr=0.05, epochs=3, batch_size=16)
        first = fit_classifier(features, labels, 3, config, np.random.default_rng(8))
        second = fit_classifier(features, labels, 3, config, np.random.default_rng(8))
        assert np.array_equal(first.weight.values, second.weight.values)

    def test_zero_epochs_keeps_initialisation(self):
        features, labels = blobs(np.random.default_rng(0))
        classifier = fit_classifier(features, labels, 3, ClassifierConfig(lr=0.05, epochs=0), np.random.default_rng(8))
        initial = LinearClassifier.initialise(5, 3, np.random.default_rng(8))
        assert np.array_equal(classifier.weight.values, initial.weight.values)

    def test_invalid_labels_fail(self, rng: np.random.Generator):
        config = ClassifierConfig(lr=0.05, epochs=1)
        with pytest.raises(InvalidInputError):
            fit_classifier(np.zeros((0, 5)), np.zeros(0), 3, config, rng)
        with pytest.raises(InvalidInputError):
            fit_classifier(np.zeros((2, 5)), np.array([0, 3]), 3, config, rng)
