import string
from pathlib import Path
from random import choice, randrange

import numpy as np

from pstl_cli.skeleton import GraphTopology, SkeletonSequence

path_tests = Path(__file__).parent
path_root = path_tests.parent
path_resources = path_tests.joinpath("__resources")

path_logging_config = path_resources.joinpath("test_logging").with_suffix(".yml")
path_config = path_resources.joinpath("test_config").with_suffix(".yml")


def random_str(start: int = 30, stop: int = 50) -> str:
    """Generates a random string of upper and lower case characters with a random length between the values given."""
    range_ = randrange(start=start, stop=stop) if start < stop else start
    return "".join(choice(string.ascii_letters) for _ in range(range_))


def path_graph(num_joints: int = 4) -> GraphTopology:
    """A chain of ``num_joints`` joints. Marked as induced as it does not cover every body part."""
    return GraphTopology(
        num_joints=num_joints,
        edges=tuple((i, i + 1) for i in range(num_joints - 1)),
        flip_permutation=tuple(reversed(range(num_joints))),
        part_assignment=tuple(i % 5 for i in range(num_joints)),
        induced=True,
    )


def random_tree(rng: np.random.Generator, num_joints: int | None = None) -> GraphTopology:
    """A random tree covering every body part with an identity flip permutation"""
    num_joints = num_joints or int(rng.integers(6, 16))
    edges = tuple((int(rng.integers(0, child)), child) for child in range(1, num_joints))
    parts = list(range(5)) + [int(part) for part in rng.integers(0, 5, size=num_joints - 5)]
    return GraphTopology(
        num_joints=num_joints,
        edges=edges,
        flip_permutation=tuple(range(num_joints)),
        part_assignment=tuple(parts),
    )


def random_sequence(
        rng: np.random.Generator, num_joints: int, frames: int = 12, channels: int = 3, label: int = 0
) -> SkeletonSequence:
    """A sequence of standard normal coordinates"""
    data = rng.normal(size=(channels, frames, num_joints))
    return SkeletonSequence(data=data, label=label)


def delete_rows_and_columns(matrix: np.ndarray, removed: list[int] | tuple[int, ...]) -> np.ndarray:
    """Brute force removal of the given rows and columns of a square matrix"""
    kept = [i for i in range(matrix.shape[0]) if i not in set(removed)]
    return np.array([[matrix[i, j] for j in kept] for i in kept], dtype=matrix.dtype)
