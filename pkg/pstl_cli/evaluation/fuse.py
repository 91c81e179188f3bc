"""
Score fusion of evaluation results from several input streams.
"""
import logging
from collections.abc import Mapping, Sequence

import numpy as np

from pstl_cli.evaluation.protocols import EvalResult
from pstl_cli.exception import InvalidInputError, ShapeMismatchError
from pstl_cli.log.logger import PSTLLogger

LOGGER: PSTLLogger = logging.getLogger(__name__)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax of ``logits`` ``[N, classes]``"""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def fuse_streams(
        streams: Mapping[str, tuple[np.ndarray, np.ndarray]] | Sequence[tuple[np.ndarray, np.ndarray]],
        seed: int = 0,
        protocol: str = "fuse",
) -> EvalResult:
    """
    Sum the softmax probabilities of every stream with equal weight and predict the most probable class.
    Ties go to the lowest class index.

    :param streams: ``(logits, labels)`` per stream, optionally keyed by stream name.
    :param seed: Recorded in the report.
    :raise InvalidInputError: When no streams are given.
    :raise ShapeMismatchError: When the streams disagree on their test samples or classes.
    """
    names = [str(name) for name in streams] if isinstance(streams, Mapping) else [str(i) for i in range(len(streams))]
    pairs = list(streams.values()) if isinstance(streams, Mapping) else list(streams)
    if not pairs:
        raise InvalidInputError("Fusion needs at least one stream")

    logits, labels = pairs[0]
    for other_logits, other_labels in pairs[1:]:
        if other_logits.shape != logits.shape:
            raise ShapeMismatchError("Streams disagree on their logits", logits.shape, other_logits.shape)
        if not np.array_equal(other_labels, labels):
            raise ShapeMismatchError("Streams were evaluated on different test sequences", labels.shape,
                                     other_labels.shape)

    fused = np.sum([softmax(stream_logits) for stream_logits, _ in pairs], axis=0)
    result = EvalResult.from_logits(protocol, fused, labels, seed=seed, extra={"streams": "+".join(names)})
    LOGGER.report(f"Fused {'+'.join(names)}: top-1 {result.report.accuracy:.4f}")
    return result
