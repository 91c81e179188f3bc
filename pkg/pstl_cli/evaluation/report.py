"""
The result of one evaluation protocol and its structured-text and CSV forms.
"""
import csv
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Self

import numpy as np
import yaml

from pstl_cli.exception import ShapeMismatchError
from pstl_cli.utils import flatten


@dataclass(frozen=True)
class EvalReport:
    """
    Accuracy of one protocol on the test split.

    :param protocol: The protocol that produced this report e.g. 'linear', 'partial-joints'.
    :param accuracy: Top-1 accuracy over the whole test split.
    :param per_class: Accuracy per class present in the test split.
    :param support: Number of test samples per class present in the test split.
    :param seed: The seed the protocol ran with.
    :param extra: Protocol-specific values e.g. the number of shaded joints or the labelled fraction.
    :param config: Echo of the settings the protocol ran with.
    """
    protocol: str
    accuracy: float
    per_class: dict[int, float]
    support: dict[int, int]
    seed: int
    extra: dict[str, Any] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_predictions(
            cls,
            protocol: str,
            predictions: Sequence[int] | np.ndarray,
            labels: Sequence[int] | np.ndarray,
            seed: int,
            extra: Mapping[str, Any] | None = None,
            config: Mapping[str, Any] | None = None,
    ) -> Self:
        """
        Build a report by comparing ``predictions`` against ``labels``.

        :raise ShapeMismatchError: When predictions and labels differ in length or are empty.
        """
        predictions = np.asarray(predictions, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        if predictions.shape != labels.shape or predictions.ndim != 1 or not len(labels):
            raise ShapeMismatchError("Predictions and labels must be equally long flat arrays", predictions.shape,
                                     labels.shape)

        correct = predictions == labels
        per_class = {}
        support = {}
        for label in np.unique(labels).tolist():
            members = labels == label
            support[label] = int(members.sum())
            per_class[label] = float(correct[members].mean())

        return cls(
            protocol=protocol,
            accuracy=float(correct.mean()),
            per_class=per_class,
            support=support,
            seed=seed,
            extra=dict(extra or {}),
            config=dict(config or {}),
        )

    def as_dict(self) -> dict[str, Any]:
        return {
            "protocol": self.protocol,
            "accuracy": self.accuracy,
            "per_class": dict(self.per_class),
            "support": dict(self.support),
            "seed": self.seed,
            **self.extra,
            "config": self.config,
        }

    def as_row(self) -> dict[str, Any]:
        """The report as a flat CSV row. Per-class accuracies and config values get dotted column names."""
        row = {"protocol": self.protocol, "accuracy": self.accuracy, "seed": self.seed, **self.extra}
        row |= {f"class.{label}": accuracy for label, accuracy in self.per_class.items()}
        row |= flatten(self.config)
        return row

    def save(self, path: str | Path) -> Path:
        """Write the report as YAML to ``path``"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as file:
            yaml.dump(self.as_dict(), file, sort_keys=False)
        return path


def write_rows(rows: Sequence[Mapping[str, Any]], path: str | Path) -> Path:
    """
    Write ``rows`` as CSV to ``path``.
    The columns are the union of every row's keys in order of first appearance. Missing values are left blank.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    columns = list(dict.fromkeys(key for row in rows for key in row))
    with open(path, "w", newline="", encoding="utf-8") as file:
        writer = csv.DictWriter(file, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)
    return path


def write_reports(reports: Sequence[EvalReport], path: str | Path) -> Path:
    """Write one CSV row per report to ``path``"""
    return write_rows([report.as_row() for report in reports], path)
