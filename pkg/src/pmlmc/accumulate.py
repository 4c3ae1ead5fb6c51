"""Order-independent streaming sums.

Roots keep running sums while sampling and the coordinators merge them at
the end of an iteration.  Plain float accumulation would make the result
depend on which group ran which sample; keeping Shewchuk partials makes
every merge exact, so the final value is the correctly rounded sum no
matter how the work was split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class ExactSum:
    __slots__ = ("partials",)

    def __init__(self, partials=()):
        self.partials: list[float] = list(partials)

    def add(self, x: float) -> None:
        partials = self.partials
        i = 0
        for y in partials:
            if abs(x) < abs(y):
                x, y = y, x
            hi = x + y
            lo = y - (hi - x)
            if lo:
                partials[i] = lo
                i += 1
            x = hi
        partials[i:] = [x]

    def merge(self, other: "ExactSum") -> None:
        for x in other.partials:
            self.add(x)

    def value(self) -> float:
        return math.fsum(self.partials)

    def copy(self) -> "ExactSum":
        return ExactSum(self.partials)


@dataclass
class LevelAccumulator:
    """Running (count, sum Y, sum Y^2, sum cost) for one level."""

    level: int
    count: int = 0
    sum_y: ExactSum = field(default_factory=ExactSum)
    sum_y2: ExactSum = field(default_factory=ExactSum)
    sum_cost: ExactSum = field(default_factory=ExactSum)

    def add(self, y: float, cost: float) -> None:
        self.count += 1
        self.sum_y.add(y)
        self.sum_y2.add(y * y)
        self.sum_cost.add(cost)

    def merge(self, other: "LevelAccumulator") -> None:
        if other.level != self.level:
            raise ValueError(f"cannot merge level {other.level} into level {self.level}")
        self.count += other.count
        self.sum_y.merge(other.sum_y)
        self.sum_y2.merge(other.sum_y2)
        self.sum_cost.merge(other.sum_cost)

    def copy(self) -> "LevelAccumulator":
        return LevelAccumulator(self.level, self.count, self.sum_y.copy(),
                                self.sum_y2.copy(), self.sum_cost.copy())
