"""Wire vocabulary between group roots and coordinators.

The same five messages serve both hops of a coordinator tree: a child
coordinator asks its parent for work with ``ReadyAtLevel`` (carrying the
number of partitions it serves) and receives a ``DoSample`` range it then
splits further, or ``NextPartition`` once the parent has nothing left.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..accumulate import LevelAccumulator


@dataclass(frozen=True)
class ReadyAtLevel:
    sender: int
    level: int
    # partitions the request is made for: 1 for a group root, P_i for a coordinator
    partitions: int = 1


@dataclass(frozen=True)
class DoSample:
    level: int
    first: int
    last: int

    def __post_init__(self):
        if self.last < self.first:
            raise ValueError(f"empty sample range {self.first}..{self.last}")

    @property
    def size(self) -> int:
        return self.last - self.first + 1


@dataclass(frozen=True)
class NextPartition:
    level: int


@dataclass(frozen=True)
class PartialSums:
    sender: int
    sums: tuple[LevelAccumulator, ...]


@dataclass(frozen=True)
class Shutdown:
    level: int


Message = ReadyAtLevel | DoSample | NextPartition | PartialSums | Shutdown


def payload(msg) -> dict:
    if isinstance(msg, ReadyAtLevel):
        return {"level": msg.level, "partitions": msg.partitions}
    if isinstance(msg, DoSample):
        return {"level": msg.level, "first": msg.first, "last": msg.last}
    if isinstance(msg, (NextPartition, Shutdown)):
        return {"level": msg.level}
    if isinstance(msg, PartialSums):
        return {"levels": {a.level: a.count for a in msg.sums}}
    raise TypeError(f"not a message: {msg!r}")


@dataclass(frozen=True)
class LogEntry:
    time: float
    src: int
    dst: int
    msg: object
    iteration: int = 0

    @property
    def type(self) -> str:
        return type(self.msg).__name__

    def to_dict(self) -> dict:
        return {"time": self.time, "from": self.src, "to": self.dst, "type": self.type,
                "payload": payload(self.msg), "iteration": self.iteration}
