"""Dynamic batch sizing and the coordinator tree layout."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import InvalidArgs


@dataclass(frozen=True)
class BatchPolicy:
    min_fraction: float = 0.01
    max_fraction: float = 0.62
    # scale tree grants by the partitions a coordinator serves (see tree_batch_size)
    scale_tree_clamps: bool = True

    def __post_init__(self):
        if not 0 < self.min_fraction <= self.max_fraction < 1:
            raise InvalidArgs("need 0 < min_fraction <= max_fraction < 1")

    def clamps(self, N: int, partitions: float) -> tuple[int, int]:
        lo = math.ceil(self.min_fraction * N / partitions)
        hi = math.ceil(self.max_fraction * N / partitions)
        return lo, hi


def batch_size(n: int, N: int, partitions: int, policy: BatchPolicy = BatchPolicy()) -> int:
    if not 0 <= n <= N or partitions < 1:
        raise InvalidArgs(f"batch_size needs 0 <= n <= N and partitions >= 1 (n={n}, N={N}, partitions={partitions})")
    if n == N:
        return 0
    raw = math.ceil((N - n) / (N * partitions))
    lo, hi = policy.clamps(N, partitions)
    return min(max(raw, lo), hi, N - n)


def tree_batch_size(n: int, N: int, P_i: int, P_total: int, policy: BatchPolicy = BatchPolicy(),
                    *, scale_clamps: bool = False) -> int:
    """Range handed to a coordinator serving ``P_i`` of ``P_total`` partitions.

    With ``scale_clamps`` off the clamps are those of a single partition
    (``partitions = P_total``).  With it on they are multiplied by ``P_i``,
    so one grant feeds every partition below the coordinator about as much
    as a direct batch would; otherwise the parent answers one request per
    root batch and the tree saves nothing.
    """
    if not 1 <= P_i <= P_total or not 0 <= n <= N:
        raise InvalidArgs("tree_batch_size needs 1 <= P_i <= P_total and 0 <= n <= N")
    if n == N:
        return 0
    raw = math.ceil((N - n) * P_i / (N * P_total))
    lo, hi = policy.clamps(N, P_total / P_i if scale_clamps else P_total)
    return min(max(raw, lo), hi, N - n)


@dataclass
class CoordinatorNode:
    id: int
    parent: int | None
    children: list[int] = field(default_factory=list)
    # indices (into the level-M group list) of the groups talking to this node
    roots: list[int] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class CoordinatorTree:
    comm_limit: int
    nodes: dict[int, CoordinatorNode]
    master: int = 0

    @property
    def size(self) -> int:
        """Number of coordinator endpoints, master included."""
        return len(self.nodes)

    def leaf_of_root(self) -> dict[int, int]:
        out = {}
        for node in self.nodes.values():
            for r in node.roots:
                out[r] = node.id
        return out

    def depth(self) -> int:
        d, node = 0, self.nodes[self.master]
        while node.children:
            node = self.nodes[node.children[0]]
            d += 1
        return d

    def fan_out(self) -> dict[int, int]:
        return {i: len(n.children) or len(n.roots) for i, n in self.nodes.items()}


def _chunks(n: int, limit: int) -> list[range]:
    """Split range(n) into groups of ``limit``; a short tail is merged into the last group."""
    full, rem = divmod(n, limit)
    sizes = [limit] * full
    if rem:
        sizes[-1] += rem
    out, start = [], 0
    for s in sizes:
        out.append(range(start, start + s))
        start += s
    return out


def build_coordinator_tree(level_M_roots: int, comm_limit: int, first_id: int = 1) -> CoordinatorTree:
    """Tree over ``level_M_roots`` roots with at most ``comm_limit`` children per node.

    The master keeps everything when that fits, or when fewer than two full
    groups could be formed.  Otherwise roots are cut into groups of
    ``comm_limit`` (the short tail joins the last group) and the same rule is
    applied to the new coordinators until the master's fan-out fits.
    Non-master nodes are numbered from ``first_id`` top-down, left to right.
    """
    if level_M_roots < 1 or comm_limit < 2:
        raise InvalidArgs("need at least one root and comm_limit >= 2")

    # build bottom-up with provisional negative ids, then renumber
    layers: list[list[CoordinatorNode]] = []
    items = list(range(level_M_roots))
    leaf = True
    counter = -1
    while len(items) >= 2 * comm_limit:
        layer = []
        for chunk in _chunks(len(items), comm_limit):
            node = CoordinatorNode(counter, None)
            counter -= 1
            members = [items[k] for k in chunk]
            if leaf:
                node.roots = members
            else:
                node.children = members
            layer.append(node)
        layers.append(layer)
        items = [n.id for n in layer]
        leaf = False

    master = CoordinatorNode(0, None)
    if leaf:
        master.roots = items
    else:
        master.children = items

    nodes = {n.id: n for layer in layers for n in layer}
    renumber = {}
    next_id = first_id
    for layer in reversed(layers):
        for n in layer:
            renumber[n.id] = next_id
            next_id += 1
    renumber[0] = 0
    out = {0: master}
    for old, n in nodes.items():
        n.id = renumber[old]
        out[n.id] = n
    for n in out.values():
        n.children = [renumber[c] for c in n.children]
        for c in n.children:
            out[c].parent = n.id
    return CoordinatorTree(comm_limit, dict(sorted(out.items())))
