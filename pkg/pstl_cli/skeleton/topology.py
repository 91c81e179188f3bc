"""
Skeleton graph topology: joints, bones, left/right symmetry and body parts.
"""
from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from pstl_cli.exception import InvalidTopologyError

#: The five major body parts every joint belongs to.
BODY_PARTS: tuple[str, ...] = ("torso", "left_arm", "right_arm", "left_leg", "right_leg")


@dataclass(frozen=True)
class GraphTopology:
    """
    An undirected skeleton graph.

    :param num_joints: The number of joints V.
    :param edges: Unordered joint pairs. Stored as sorted ``(low, high)`` tuples.
    :param flip_permutation: Joint permutation swapping left and right sides. Must be an involution.
    :param part_assignment: Index into :py:data:`BODY_PARTS` for every joint.
    :param root: The joint bone vectors are measured from.
    :param induced: Whether this graph is an induced subgraph left after masking.
        Induced graphs may be disconnected and may not cover every body part.
    """
    num_joints: int
    edges: tuple[tuple[int, int], ...]
    flip_permutation: tuple[int, ...]
    part_assignment: tuple[int, ...]
    root: int = 0
    induced: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(tuple(sorted(map(int, edge))) for edge in self.edges))
        object.__setattr__(self, "flip_permutation", tuple(map(int, self.flip_permutation)))
        object.__setattr__(self, "part_assignment", tuple(map(int, self.part_assignment)))
        self.validate()

    def validate(self) -> None:
        """Check all structural invariants, raising :py:class:`InvalidTopologyError` on the first failure."""
        n = self.num_joints
        if n < 1 or (not self.induced and n < 2):
            raise InvalidTopologyError(f"A skeleton needs at least 2 joints, got {n}")

        seen = set()
        for a, b in self.edges:
            if not (0 <= a < n and 0 <= b < n):
                raise InvalidTopologyError(f"Edge {(a, b)} references a joint outside [0, {n})")
            if a == b:
                raise InvalidTopologyError(f"Self-loop edge on joint {a}")
            if (a, b) in seen:
                raise InvalidTopologyError(f"Duplicate edge {(a, b)}")
            seen.add((a, b))

        flip = self.flip_permutation
        if sorted(flip) != list(range(n)):
            raise InvalidTopologyError(f"Flip permutation is not a permutation of {n} joints")
        if any(flip[flip[i]] != i for i in range(n)):
            raise InvalidTopologyError("Flip permutation is not an involution")

        if len(self.part_assignment) != n:
            raise InvalidTopologyError("Part assignment does not cover every joint")
        if any(not 0 <= part < len(BODY_PARTS) for part in self.part_assignment):
            raise InvalidTopologyError(f"Part ids must lie in [0, {len(BODY_PARTS)})")
        if not 0 <= self.root < n:
            raise InvalidTopologyError(f"Root joint {self.root} outside [0, {n})")

        if self.induced:
            return
        if set(self.part_assignment) != set(range(len(BODY_PARTS))):
            raise InvalidTopologyError(f"Every one of the {len(BODY_PARTS)} body parts needs at least one joint")
        if not self.is_connected:
            raise InvalidTopologyError("Skeleton graph is not connected")

    @cached_property
    def neighbours(self) -> tuple[tuple[int, ...], ...]:
        """Adjacency list per joint, in ascending joint order"""
        neighbours: list[list[int]] = [[] for _ in range(self.num_joints)]
        for a, b in self.edges:
            neighbours[a].append(b)
            neighbours[b].append(a)
        return tuple(tuple(sorted(joints)) for joints in neighbours)

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Binary symmetric adjacency matrix without self-loops"""
        matrix = np.zeros((self.num_joints, self.num_joints), dtype=np.int64)
        for a, b in self.edges:
            matrix[a, b] = matrix[b, a] = 1
        matrix.setflags(write=False)
        return matrix

    @cached_property
    def is_connected(self) -> bool:
        """Whether every joint can be reached from every other joint"""
        return len(self._breadth_first(self.root)[0]) == self.num_joints

    @property
    def is_tree(self) -> bool:
        """Whether the graph is connected and acyclic"""
        return self.is_connected and len(self.edges) == self.num_joints - 1

    @cached_property
    def parents(self) -> tuple[int, ...]:
        """
        Parent of every joint in the breadth-first spanning tree from :py:attr:`root`. The root is its own parent.

        :raise InvalidTopologyError: When the graph has no spanning tree.
        """
        order, parents = self._breadth_first(self.root)
        if len(order) != self.num_joints:
            raise InvalidTopologyError("No spanning tree exists for a disconnected skeleton graph")
        return tuple(parents[joint] for joint in range(self.num_joints))

    def _breadth_first(self, start: int) -> tuple[list[int], dict[int, int]]:
        order = [start]
        parents = {start: start}
        queue = deque([start])
        while queue:
            joint = queue.popleft()
            for neighbour in self.neighbours[joint]:
                if neighbour not in parents:
                    parents[neighbour] = joint
                    order.append(neighbour)
                    queue.append(neighbour)
        return order, parents

    def joints_of_parts(self, parts: Iterable[int]) -> tuple[int, ...]:
        """All joints assigned to any of the given ``parts``"""
        parts = set(parts)
        return tuple(joint for joint, part in enumerate(self.part_assignment) if part in parts)

    @property
    def parts_present(self) -> tuple[int, ...]:
        """The body parts with at least one joint in this graph"""
        return tuple(sorted(set(self.part_assignment)))

    def as_dict(self) -> dict[str, object]:
        return {
            "num_joints": self.num_joints,
            "edges": [list(edge) for edge in self.edges],
            "flip_permutation": list(self.flip_permutation),
            "part_assignment": list(self.part_assignment),
            "root": self.root,
        }


def degree_vector(topology: GraphTopology) -> np.ndarray:
    """Number of edges incident to every joint"""
    degrees = np.zeros(topology.num_joints, dtype=np.int64)
    for a, b in topology.edges:
        degrees[a] += 1
        degrees[b] += 1
    return degrees


###########################################################################
## Layouts
###########################################################################
def _from_one_based(pairs: Sequence[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    return tuple((a - 1, b - 1) for a, b in pairs)


def _flip_from_pairs(num_joints: int, pairs: Iterable[tuple[int, int]]) -> tuple[int, ...]:
    flip = list(range(num_joints))
    for left, right in pairs:
        flip[left], flip[right] = right, left
    return tuple(flip)


def compact10() -> GraphTopology:
    """
    Ten joint body used for desk-scale synthetic data.

    Joints: pelvis, neck, left elbow/hand, right elbow/hand, left knee/foot, right knee/foot.
    """
    edges = ((0, 1), (1, 2), (2, 3), (1, 4), (4, 5), (0, 6), (6, 7), (0, 8), (8, 9))
    flip = _flip_from_pairs(10, ((2, 4), (3, 5), (6, 8), (7, 9)))
    parts = (0, 0, 1, 1, 2, 2, 3, 3, 4, 4)
    return GraphTopology(num_joints=10, edges=edges, flip_permutation=flip, part_assignment=parts, root=0)


def ntu25() -> GraphTopology:
    """The 25 joint Kinect v2 layout used by the NTU RGB+D datasets, rooted at the spine base."""
    edges = _from_one_based((
        (1, 2), (2, 21), (3, 21), (4, 3), (5, 21), (6, 5), (7, 6), (8, 7), (9, 21), (10, 9), (11, 10), (12, 11),
        (13, 1), (14, 13), (15, 14), (16, 15), (17, 1), (18, 17), (19, 18), (20, 19), (22, 23), (23, 8),
        (24, 25), (25, 12),
    ))
    flip = _flip_from_pairs(25, _from_one_based((
        (5, 9), (6, 10), (7, 11), (8, 12), (22, 24), (23, 25), (13, 17), (14, 18), (15, 19), (16, 20),
    )))

    parts = [0] * 25
    for part, joints in enumerate(((1, 2, 3, 4, 21), (5, 6, 7, 8, 22, 23), (9, 10, 11, 12, 24, 25),
                                   (13, 14, 15, 16), (17, 18, 19, 20))):
        for joint in joints:
            parts[joint - 1] = part

    return GraphTopology(num_joints=25, edges=edges, flip_permutation=flip, part_assignment=tuple(parts), root=0)


LAYOUTS = {"compact10": compact10, "ntu25": ntu25}
