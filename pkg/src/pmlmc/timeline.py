"""Per-worker execution timelines (Gantt data) and their core-time split."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable


@dataclass(frozen=True)
class Activity:
    """One task executed by a group of workers."""

    task: int
    level: int
    workers: range
    start: float
    end: float
    iteration: int = 0

    @property
    def core_time(self) -> float:
        return (self.end - self.start) * len(self.workers)


@dataclass(frozen=True)
class Assignment:
    time: float
    task: int
    level: int
    root: int
    iteration: int = 0


@dataclass(frozen=True)
class Interval:
    worker: int
    start: float
    end: float
    kind: str  # "active" | "idle" | "manage"
    task: int | None = None
    level: int | None = None

    def to_dict(self) -> dict:
        return {"worker": self.worker, "start": self.start, "end": self.end,
                "kind": self.kind, "task": self.task, "level": self.level}


class TimelineError(ValueError):
    pass


@dataclass
class Timeline:
    p: int
    q: tuple[int, ...]
    activities: list[Activity] = field(default_factory=list)
    assignments: list[Assignment] = field(default_factory=list)
    makespan: float = 0.0
    # endpoints outside 1..p that spend the whole run managing
    coordinators: tuple[int, ...] = ()
    # (start, end) of each synchronised iteration
    iterations: list[tuple[float, float]] = field(default_factory=list)

    @property
    def total_processors(self) -> int:
        return self.p + len(self.coordinators)

    def active_core_time(self) -> float:
        return sum(a.core_time for a in self.activities)

    def manage_core_time(self) -> float:
        return len(self.coordinators) * self.makespan

    def idle_core_time(self) -> float:
        return sum(iv.end - iv.start for iv in self.intervals() if iv.kind == "idle")

    def per_worker(self) -> dict[int, list[Activity]]:
        by_worker: dict[int, list[Activity]] = {w: [] for w in range(1, self.p + 1)}
        for a in self.activities:
            for w in a.workers:
                by_worker[w].append(a)
        for acts in by_worker.values():
            acts.sort(key=lambda a: (a.start, a.end))
        return by_worker

    def intervals(self) -> list[Interval]:
        """Gap-free per-worker intervals from 0 to the makespan.

        Raises TimelineError if a worker has overlapping activities.
        """
        out: list[Interval] = []
        W = self.makespan
        for w, acts in self.per_worker().items():
            t = 0.0
            for a in acts:
                if a.start < t:
                    raise TimelineError(f"worker {w}: activity {a.task} at {a.start} overlaps previous end {t}")
                if a.start > t:
                    out.append(Interval(w, t, a.start, "idle"))
                out.append(Interval(w, a.start, a.end, "active", a.task, a.level))
                t = a.end
            if t > W:
                raise TimelineError(f"worker {w} busy past the makespan")
            if t < W:
                out.append(Interval(w, t, W, "idle"))
        for c in self.coordinators:
            out.append(Interval(c, 0.0, W, "manage"))
        return out

    def last_assignment_time(self, iteration: int | None = None) -> float:
        times = [a.time for a in self.assignments if iteration is None or a.iteration == iteration]
        return max(times, default=0.0)

    def to_dict(self, intervals: Iterable[Interval] | None = None) -> dict:
        ivs = self.intervals() if intervals is None else intervals
        return {"p": self.p, "q": list(self.q), "makespan": self.makespan,
                "intervals": [iv.to_dict() for iv in ivs]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)
