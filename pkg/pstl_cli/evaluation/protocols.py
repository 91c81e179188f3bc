"""
Downstream protocols measuring the quality of a pretrained encoder:
linear evaluation, partial-body evaluation, finetuning and semi-supervised finetuning.
"""
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Self

import numpy as np

from pstl_cli.config.pipeline import ClassifierConfig, PartialMode
from pstl_cli.evaluation.classifier import LinearClassifier, fit_classifier, iterate_batches
from pstl_cli.evaluation.report import EvalReport
from pstl_cli.exception import InvalidInputError, MissingInputError
from pstl_cli.log.logger import PSTLLogger
from pstl_cli.masking import restrict_topology, sample_part_mask, sample_spatial_mask, uniform_probabilities
from pstl_cli.model import EncoderState, check_compatible, encode, normalize_adjacency
from pstl_cli.numerics import AdamState, adam_step, no_grad
from pstl_cli.numerics import ops
from pstl_cli.skeleton import Dataset, Modality, Split
from pstl_cli.training.schedule import cosine_lr

LOGGER: PSTLLogger = logging.getLogger(__name__)

#: Sequences encoded at once when extracting features.
FEATURE_CHUNK = 256


@dataclass(frozen=True)
class EvalResult:
    """
    A report together with the test logits it was computed from.

    :param report: The accuracy report.
    :param logits: Test logits of shape ``[N, classes]``.
    :param labels: Test labels of shape ``[N]``.
    """
    report: EvalReport
    logits: np.ndarray
    labels: np.ndarray

    def save(self, folder: str | Path, name: str = "report") -> Path:
        """Write the report as YAML plus the logits and labels as .npy files into ``folder``"""
        folder = Path(folder)
        folder.mkdir(parents=True, exist_ok=True)
        np.save(folder.joinpath(f"{name}_logits.npy"), self.logits)
        np.save(folder.joinpath(f"{name}_labels.npy"), self.labels)
        return self.report.save(folder.joinpath(name).with_suffix(".yml"))

    @classmethod
    def load_logits(cls, folder: str | Path, name: str = "report") -> tuple[np.ndarray, np.ndarray]:
        """
        Read the logits and labels written by :py:meth:`save`.

        :raise MissingInputError: When either file does not exist.
        """
        folder = Path(folder)
        paths = folder.joinpath(f"{name}_logits.npy"), folder.joinpath(f"{name}_labels.npy")
        for path in paths:
            if not path.is_file():
                raise MissingInputError(f"No evaluation output found at {path}")
        return np.load(paths[0]), np.load(paths[1])

    @classmethod
    def from_logits(
            cls,
            protocol: str,
            logits: np.ndarray,
            labels: np.ndarray,
            seed: int,
            extra: dict[str, Any] | None = None,
            config: dict[str, Any] | None = None,
    ) -> Self:
        report = EvalReport.from_predictions(
            protocol, predictions=np.argmax(logits, axis=1), labels=labels, seed=seed, extra=extra, config=config
        )
        return cls(report=report, logits=logits, labels=labels)


def _generators(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent generators for the classifier, evaluation masks and labelled subset selection"""
    return tuple(np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(3))


def extract_features(state: EncoderState, data: np.ndarray, adjacency: np.ndarray) -> np.ndarray:
    """
    Encode ``data`` ``[N, C, T, V]`` with a frozen encoder in evaluation mode.

    :param adjacency: Normalised adjacency ``[V, V]`` or per sequence ``[N, V, V]``.
    :return: Features of shape ``[N, c_h]``.
    """
    training = state.training
    state.eval()
    try:
        features = []
        with no_grad():
            for start in range(0, len(data), FEATURE_CHUNK):
                chunk = slice(start, start + FEATURE_CHUNK)
                graph = adjacency[chunk] if adjacency.ndim == 3 else adjacency
                features.append(encode(state, data[chunk], graph).numpy())
    finally:
        state.training = training
    return np.concatenate(features) if features else np.zeros((0, state.config.feature_dim))


def _split_arrays(state: EncoderState, dataset: Dataset, split: Split, modality: Modality) -> tuple[np.ndarray, ...]:
    data, labels = dataset.arrays(split, modality)
    if not len(labels):
        raise InvalidInputError(f"The dataset has no {split} sequences")
    check_compatible(state, data.shape[1])
    return data, labels


def _fit_linear_classifier(
        state: EncoderState, dataset: Dataset, modality: Modality, config: ClassifierConfig, rng: np.random.Generator
) -> LinearClassifier:
    data, labels = _split_arrays(state, dataset, Split.TRAIN, modality)
    features = extract_features(state, data, normalize_adjacency(dataset.topology))
    return fit_classifier(features, labels, dataset.num_classes, config, rng)


###########################################################################
## Linear evaluation
###########################################################################
def linear_eval(
        state: EncoderState, dataset: Dataset, modality: Modality | str, config: ClassifierConfig, seed: int
) -> EvalResult:
    """
    Train an affine classifier on features of the frozen encoder and report test accuracy.
    Encoder parameters and running statistics are left untouched.
    """
    modality = Modality(modality)
    classifier_rng, _, _ = _generators(seed)
    classifier = _fit_linear_classifier(state, dataset, modality, config, classifier_rng)

    data, labels = _split_arrays(state, dataset, Split.TEST, modality)
    logits = classifier.predict(extract_features(state, data, normalize_adjacency(dataset.topology)))

    result = EvalResult.from_logits(
        "linear", logits, labels, seed=seed, extra={"modality": str(modality)}, config=config.model_dump(mode="json")
    )
    LOGGER.report(f"Linear evaluation on {modality} stream: top-1 {result.report.accuracy:.4f}")
    return result


###########################################################################
## Partial body evaluation
###########################################################################
def check_shade_count(dataset: Dataset, mode: PartialMode | str, count: int) -> None:
    """
    :raise InvalidInputError: When ``count`` joints or parts cannot be shaded from the dataset's skeleton.
    """
    if PartialMode(mode) == PartialMode.JOINTS:
        limit = dataset.topology.num_joints - 2
    else:
        limit = len(dataset.topology.parts_present) - 1
    if not 0 <= count <= limit:
        raise InvalidInputError(f"Cannot shade {count} {mode}: the count must lie in [0, {limit}]")


def _masked_features(
        state: EncoderState,
        dataset: Dataset,
        data: np.ndarray,
        mode: PartialMode,
        count: int,
        rng: np.random.Generator,
) -> tuple[np.ndarray, float]:
    """
    Features of ``data`` with a fresh mask drawn for every sequence.

    :return: The features and the mean number of joints removed.
    """
    topology = dataset.topology
    probabilities = uniform_probabilities(topology.num_joints)

    plans = []
    for _ in range(len(data)):
        if mode == PartialMode.JOINTS:
            plans.append(sample_spatial_mask(probabilities, count, rng))
        else:
            plans.append(sample_part_mask(topology, count, rng))

    # sequences are encoded in groups sharing a joint count
    groups: dict[int, list[int]] = {}
    for i, plan in enumerate(plans):
        groups.setdefault(len(plan.masked_joints), []).append(i)

    features = np.zeros((len(data), state.config.feature_dim))
    for indices in groups.values():
        kept = np.stack([plans[i].kept_joints for i in indices])
        batch = np.stack([data[i][:, :, kept[j]] for j, i in enumerate(indices)])
        adjacency = np.stack([
            normalize_adjacency(restrict_topology(topology, plans[i].masked_joints)[0]) for i in indices
        ])
        features[indices] = extract_features(state, batch, adjacency)

    removed = float(np.mean([len(plan.masked_joints) for plan in plans]))
    return features, removed


def partial_body_eval(
        state: EncoderState,
        dataset: Dataset,
        modality: Modality | str,
        config: ClassifierConfig,
        mode: PartialMode | str,
        counts: Sequence[int],
        seed: int,
) -> list[EvalResult]:
    """
    Linear evaluation where every test sequence has random joints, or every joint of random body parts,
    removed together with their rows and columns of the adjacency.
    The classifier is trained once on unmasked features. Masks are redrawn per test sequence.

    :param counts: The numbers of joints or parts to shade. One result is produced for each.
    :raise InvalidInputError: When a count is out of range for the skeleton.
    """
    modality, mode = Modality(modality), PartialMode(mode)
    for count in counts:
        check_shade_count(dataset, mode, count)

    classifier_rng, _, _ = _generators(seed)
    classifier = _fit_linear_classifier(state, dataset, modality, config, classifier_rng)
    data, labels = _split_arrays(state, dataset, Split.TEST, modality)

    results = []
    for count in counts:
        if count == 0:
            features = extract_features(state, data, normalize_adjacency(dataset.topology))
            removed = 0.0
        else:
            _, mask_rng, _ = _generators(seed)
            features, removed = _masked_features(state, dataset, data, mode, count, mask_rng)

        result = EvalResult.from_logits(
            f"partial-{mode}",
            classifier.predict(features),
            labels,
            seed=seed,
            extra={"modality": str(modality), "shaded": count, "joints_removed": removed},
            config=config.model_dump(mode="json"),
        )
        LOGGER.report(f"Partial body evaluation with {count} {mode} shaded: top-1 {result.report.accuracy:.4f}")
        results.append(result)

    return results


###########################################################################
## Finetuning
###########################################################################
def _finetune(
        state: EncoderState,
        dataset: Dataset,
        modality: Modality,
        config: ClassifierConfig,
        classifier_rng: np.random.Generator,
        train_indices: np.ndarray | None = None,
) -> tuple[EncoderState, LinearClassifier]:
    data, labels = _split_arrays(state, dataset, Split.TRAIN, modality)
    if train_indices is not None:
        data, labels = data[train_indices], labels[train_indices]
    if len(labels) < 2:
        raise InvalidInputError(f"Finetuning needs at least 2 labelled sequences, got {len(labels)}")

    state = state.copy().train()
    for param in state.parameters.values():
        param.requires_grad = True
    classifier = LinearClassifier.initialise(state.config.feature_dim, dataset.num_classes, classifier_rng)

    parameters = state.parameters | classifier.parameters
    optimiser = AdamState.for_parameters(parameters)
    adjacency = normalize_adjacency(dataset.topology)

    for epoch in range(config.epochs):
        # batch norm needs at least 2 sequences per batch
        batches = list(iterate_batches(len(labels), config.batch_size, classifier_rng, min_size=2))
        for i, indices in enumerate(batches):
            lr = cosine_lr(epoch + i / len(batches), epochs=config.epochs, base_lr=config.lr)
            for param in parameters.values():
                param.zero_grad()

            loss = ops.cross_entropy(classifier(encode(state, data[indices], adjacency)), labels[indices])
            loss.backward()
            adam_step(
                optimiser,
                parameters,
                {name: param.grad for name, param in parameters.items()},
                lr=lr,
                weight_decay=config.weight_decay,
            )
        LOGGER.stat(f"Finetune epoch {epoch + 1:>4}/{config.epochs} | loss {loss.item():.5f}")

    return state.eval(), classifier


def finetune_eval(
        state: EncoderState, dataset: Dataset, modality: Modality | str, config: ClassifierConfig, seed: int
) -> EvalResult:
    """
    Append an affine classifier and train it together with every encoder parameter.
    The given ``state`` is copied and left untouched.
    """
    modality = Modality(modality)
    classifier_rng, _, _ = _generators(seed)
    tuned, classifier = _finetune(state, dataset, modality, config, classifier_rng)

    data, labels = _split_arrays(tuned, dataset, Split.TEST, modality)
    logits = classifier.predict(extract_features(tuned, data, normalize_adjacency(dataset.topology)))

    result = EvalResult.from_logits(
        "finetune", logits, labels, seed=seed, extra={"modality": str(modality)}, config=config.model_dump(mode="json")
    )
    LOGGER.report(f"Finetuning on {modality} stream: top-1 {result.report.accuracy:.4f}")
    return result


###########################################################################
## Semi-supervised
###########################################################################
def stratified_subset(labels: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """
    Choose ``round(fraction * N)`` positions of ``labels`` with every present class represented
    in proportion to its frequency, and at least once.

    :return: The chosen positions in ascending order.
    :raise InvalidInputError: When the subset would be smaller than the number of present classes.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if not 0 < fraction <= 1:
        raise InvalidInputError(f"Labelled fraction must lie in (0, 1], got {fraction}")

    classes, counts = np.unique(labels, return_counts=True)
    total = int(round(fraction * len(labels)))
    if total < len(classes):
        raise InvalidInputError(
            f"A labelled fraction of {fraction} gives {total} sequences, fewer than the {len(classes)} classes"
        )

    desired = total * counts / counts.sum()
    quota = np.minimum(np.maximum(np.floor(desired).astype(np.int64), 1), counts)
    while quota.sum() > total:
        surplus = np.where(quota > 1, quota - desired, -np.inf)
        quota[np.argmax(surplus)] -= 1
    while quota.sum() < total:
        shortfall = np.where(quota < counts, desired - quota, -np.inf)
        quota[np.argmax(shortfall)] += 1

    chosen = [
        rng.choice(np.flatnonzero(labels == label), size=size, replace=False) for label, size in zip(classes, quota)
    ]
    return np.sort(np.concatenate(chosen))


def semi_supervised_eval(
        state: EncoderState,
        dataset: Dataset,
        modality: Modality | str,
        config: ClassifierConfig,
        fraction: float,
        seed: int,
) -> EvalResult:
    """Finetuning restricted to a seeded, class-stratified ``fraction`` of the training labels"""
    modality = Modality(modality)
    classifier_rng, _, subset_rng = _generators(seed)

    train_labels = dataset.labels[dataset.indices(Split.TRAIN)]
    indices = stratified_subset(train_labels, fraction, subset_rng)
    if len(indices) == len(train_labels):
        indices = None

    tuned, classifier = _finetune(state, dataset, modality, config, classifier_rng, train_indices=indices)
    data, labels = _split_arrays(tuned, dataset, Split.TEST, modality)
    logits = classifier.predict(extract_features(tuned, data, normalize_adjacency(dataset.topology)))

    labelled = len(train_labels) if indices is None else len(indices)
    result = EvalResult.from_logits(
        "semi",
        logits,
        labels,
        seed=seed,
        extra={"modality": str(modality), "fraction": fraction, "labelled": labelled},
        config=config.model_dump(mode="json"),
    )
    LOGGER.report(
        f"Semi-supervised finetuning with {labelled} labels ({fraction:.0%}): top-1 {result.report.accuracy:.4f}"
    )
    return result
