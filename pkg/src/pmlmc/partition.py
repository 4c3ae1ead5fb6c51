"""Nested partitions of worker ranks.

Workers are numbered 1..p (coordinators live outside the family).  Level M
cuts the ranks into groups of q_M, every group at level l is cut into
groups of q_{l-1}, and so on down to level 0.  Leftover ranks that cannot
fill a group form a *remainder* group which never samples at its own level
and only exists to be split further.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

from .errors import InvalidSpec, OutOfRange


@dataclass(frozen=True)
class PartitionSpec:
    p: int
    q: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(int(x) for x in self.q))
        if self.p < 1:
            raise InvalidSpec("p must be at least 1")
        if not self.q:
            raise InvalidSpec("q must list at least one group size")
        if any(x < 1 for x in self.q):
            raise InvalidSpec("group sizes must be positive")
        if any(a >= b for a, b in zip(self.q, self.q[1:])):
            raise InvalidSpec("q must be strictly increasing")
        if self.q[-1] > self.p:
            raise InvalidSpec(f"q exceeds p ({self.q[-1]} > {self.p})")

    @property
    def M(self) -> int:
        return len(self.q) - 1


@dataclass(frozen=True)
class Group:
    level: int
    members: range
    is_remainder: bool = False

    @property
    def root(self) -> int:
        return self.members.start

    @property
    def size(self) -> int:
        return len(self.members)

    def to_dict(self) -> dict:
        return {"root": self.root, "members": [self.members.start, self.members.stop - 1],
                "size": self.size, "is_remainder": self.is_remainder}


class Divisibility(enum.Enum):
    FULLY_DIVISIBLE = "FullyDivisible"
    PARTIALLY_DIVISIBLE = "PartiallyDivisible"


def _split(lo: int, size: int, level: int, q: int) -> list[Group]:
    full, rem = divmod(size, q)
    groups = [Group(level, range(lo + k * q, lo + (k + 1) * q)) for k in range(full)]
    if rem:
        start = lo + full * q
        groups.append(Group(level, range(start, start + rem), is_remainder=True))
    return groups


@dataclass(frozen=True)
class PartitionFamily:
    spec: PartitionSpec
    # levels[l] is the tuple of groups at level l, ascending by root
    levels: tuple[tuple[Group, ...], ...]

    @cached_property
    def _index(self) -> tuple[list[int], ...]:
        # rank -> position of its group, per level
        p = self.spec.p
        index = []
        for groups in self.levels:
            pos = [0] * (p + 1)
            for k, g in enumerate(groups):
                for r in g.members:
                    pos[r] = k
            index.append(pos)
        return tuple(index)

    @property
    def M(self) -> int:
        return self.spec.M

    def children(self, group: Group) -> list[Group]:
        """Groups at ``group.level - 1`` contained in ``group``."""
        if group.level == 0:
            return []
        pos = self._index[group.level - 1]
        lower = self.levels[group.level - 1]
        first, last = pos[group.members.start], pos[group.members.stop - 1]
        return list(lower[first:last + 1])

    def full_groups(self, level: int) -> list[Group]:
        return [g for g in self.levels[level] if not g.is_remainder]

    def idle_ranks(self) -> list[int]:
        """Ranks that belong to no full level-0 group and can never sample."""
        return [r for g in self.levels[0] if g.is_remainder for r in g.members]

    def to_dict(self) -> dict:
        return {
            "p": self.spec.p,
            "q": list(self.spec.q),
            "divisibility": divisibility_class(self.spec).value,
            "levels": [
                {"level": l, "q": self.spec.q[l], "groups": [g.to_dict() for g in groups]}
                for l, groups in reversed(list(enumerate(self.levels)))
            ],
            "idle_ranks": self.idle_ranks(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def to_text(self) -> str:
        lines = [f"p={self.spec.p} q={list(self.spec.q)} ({divisibility_class(self.spec).value})"]
        for l in range(self.M, -1, -1):
            parts = []
            for g in self.levels[l]:
                tag = "*" if g.is_remainder else ""
                parts.append(f"{{{g.members.start}..{g.members.stop - 1}}}{tag}")
            roots = ",".join(str(g.root) for g in self.levels[l])
            lines.append(f"level {l} (q={self.spec.q[l]}): roots {roots}")
            lines.append("  " + " ".join(parts))
        idle = self.idle_ranks()
        if idle:
            lines.append(f"permanently idle ranks: {idle}")
        return "\n".join(lines)


def build_family(spec: PartitionSpec | None = None, *, p: int | None = None,
                 q: Sequence[int] | None = None) -> PartitionFamily:
    if spec is None:
        spec = PartitionSpec(p, tuple(q))
    M = spec.M
    levels: list[list[Group]] = [[] for _ in range(M + 1)]
    levels[M] = _split(1, spec.p, M, spec.q[M])
    for l in range(M, 0, -1):
        for g in levels[l]:
            levels[l - 1].extend(_split(g.members.start, g.size, l - 1, spec.q[l - 1]))
    return PartitionFamily(spec, tuple(tuple(gs) for gs in levels))


def group_of(family: PartitionFamily, rank: int, level: int) -> Group:
    if not 1 <= rank <= family.spec.p:
        raise OutOfRange(f"rank {rank} outside 1..{family.spec.p}")
    if not 0 <= level <= family.M:
        raise OutOfRange(f"level {level} outside 0..{family.M}")
    return family.levels[level][family._index[level][rank]]


def is_root(family: PartitionFamily, rank: int, level: int) -> bool:
    return group_of(family, rank, level).root == rank


def divisibility_class(spec: PartitionSpec) -> Divisibility:
    chain = list(spec.q) + [spec.p]
    if all(b % a == 0 for a, b in zip(chain, chain[1:])):
        return Divisibility.FULLY_DIVISIBLE
    return Divisibility.PARTIALLY_DIVISIBLE
