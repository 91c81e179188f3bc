"""
Redundancy-reduction losses: the cross-correlation of two embedding batches is pushed towards the identity.
"""
import numpy as np

from pstl_cli.config.pipeline import LossConfig
from pstl_cli.exception import InvalidInputError, ShapeMismatchError
from pstl_cli.numerics import ops
from pstl_cli.numerics.tensor import Tensor


def cross_correlation(z1: Tensor | np.ndarray, z2: Tensor | np.ndarray, config: LossConfig) -> Tensor:
    """
    Correlation of every dimension of ``z1`` with every dimension of ``z2`` along the batch axis.

    ``C_ij = sum_b z1_bi z2_bj / (sqrt(sum_b z1_bi^2 + eps) * sqrt(sum_b z2_bj^2 + eps))``,
    computed after subtracting per-dimension batch means when ``config.center_embeddings`` is set.

    :param z1: Embeddings ``[B, c]``.
    :param z2: Embeddings ``[B, c']``.
    :raise InvalidInputError: When the batch holds fewer than 2 embeddings.
    :raise ShapeMismatchError: When the batch sizes differ.
    """
    z1, z2 = ops.as_tensor(z1), ops.as_tensor(z2)
    if z1.ndim != 2 or z2.ndim != 2 or z1.shape[0] != z2.shape[0]:
        raise ShapeMismatchError("Embedding batches must be [B, c] with equal B", z1.shape, z2.shape)
    if z1.shape[0] < 2:
        raise InvalidInputError(f"Cross-correlation needs a batch of at least 2, got {z1.shape[0]}")

    if config.center_embeddings:
        z1 = ops.sub(z1, ops.mean_pool(z1, axes=0, keepdims=True))
        z2 = ops.sub(z2, ops.mean_pool(z2, axes=0, keepdims=True))

    numerator = ops.matmul(ops.transpose(z1), z2)
    norm1 = ops.sqrt(ops.add(ops.sum(ops.mul(z1, z1), axes=0), config.epsilon))
    norm2 = ops.sqrt(ops.add(ops.sum(ops.mul(z2, z2), axes=0), config.epsilon))
    denominator = ops.mul(ops.reshape(norm1, (-1, 1)), ops.reshape(norm2, (1, -1)))
    return ops.div(numerator, denominator)


def bt_loss(c: Tensor | np.ndarray, redundancy_weight: float) -> Tensor:
    """
    ``sum_i (1 - C_ii)^2 + λ sum_i sum_{j != i} C_ij^2``

    :raise ShapeMismatchError: When ``c`` is not square.
    """
    c = ops.as_tensor(c)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ShapeMismatchError("Cross-correlation must be square", c.shape)

    identity = np.eye(c.shape[0])
    on_diagonal = ops.sub(identity, ops.mul(c, identity))
    off_diagonal = ops.mul(c, 1.0 - identity)

    invariance = ops.sum(ops.mul(on_diagonal, on_diagonal))
    redundancy = ops.sum(ops.mul(off_diagonal, off_diagonal))
    return ops.add(invariance, ops.scale(redundancy, redundancy_weight))


def pstl_loss(
        z_anchor: Tensor,
        z_spatial: Tensor | None,
        z_temporal: Tensor | None,
        config: LossConfig,
) -> tuple[Tensor, Tensor, Tensor]:
    """
    The loss of the anchor against the spatially masked stream (L_1) and the temporally masked stream (L_2).

    A stream given as None contributes a zero term.

    :return: ``(L_1 + L_2, L_1, L_2)``.
    :raise ShapeMismatchError: When the embedding batches differ in shape.
    """
    for z in (z_spatial, z_temporal):
        if z is not None and z.shape != z_anchor.shape:
            raise ShapeMismatchError("All embedding batches must share one shape", z_anchor.shape, z.shape)

    def term(z: Tensor | None) -> Tensor:
        if z is None:
            return Tensor(0.0)
        return bt_loss(cross_correlation(z_anchor, z, config), config.redundancy_weight)

    loss_spatial = term(z_spatial)
    loss_temporal = term(z_temporal)
    return ops.add(loss_spatial, loss_temporal), loss_spatial, loss_temporal
