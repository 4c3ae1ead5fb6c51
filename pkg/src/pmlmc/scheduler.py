"""Incremental greedy scheduling of multi-processor sampling tasks.

``greedy_schedule`` is a virtual-time event loop: every group of the
partition family starts at the finest level and, whenever it becomes
ready, takes the next unassigned task of its level.  A group whose level is
exhausted splits into its subgroups one level down; below level 0 it
leaves.  Durations are only looked at when a task is scheduled to finish,
never to choose what runs next.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from typing import Sequence

from .errors import UnschedulableTask
from .partition import Divisibility, Group, PartitionFamily, divisibility_class
from .timeline import Activity, Assignment, Interval, Timeline


@dataclass(frozen=True)
class TaskInstance:
    id: int
    level: int
    duration: float
    procs: int = 1

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"task {self.id}: duration must be positive")


@dataclass(frozen=True)
class WorkBounds:
    total_work: float
    lower_bound: float
    optimal: float | None = None


def make_tasks(durations_by_level: Sequence[Sequence[float]], q: Sequence[int]) -> list[TaskInstance]:
    """Tasks numbered consecutively, finest level first, in the given order."""
    tasks = []
    for level in range(len(durations_by_level) - 1, -1, -1):
        for w in durations_by_level[level]:
            tasks.append(TaskInstance(len(tasks), level, float(w), q[level]))
    return tasks


def work_bounds(tasks: Sequence[TaskInstance], p: int) -> WorkBounds:
    if tasks and max(t.procs for t in tasks) > p:
        raise UnschedulableTask("a task needs more processors than available")
    total = sum(t.procs * t.duration for t in tasks)
    longest = max((t.duration for t in tasks), default=0.0)
    return WorkBounds(total, max(total / p, longest))


def greedy_schedule(tasks: Sequence[TaskInstance], family: PartitionFamily) -> Timeline:
    q = family.spec.q
    queues: list[deque[TaskInstance]] = [deque() for _ in q]
    for t in tasks:
        if not 0 <= t.level <= family.M:
            raise UnschedulableTask(f"task {t.id} has level {t.level} outside 0..{family.M}")
        if t.procs != q[t.level]:
            raise UnschedulableTask(f"task {t.id} needs {t.procs} processors, level {t.level} groups have {q[t.level]}")
        queues[t.level].append(t)

    timeline = Timeline(family.spec.p, q)
    seq = 0
    ready: list[tuple[float, int, int, Group]] = []
    for g in family.levels[family.M]:
        ready.append((0.0, g.root, seq, g))
        seq += 1
    heapq.heapify(ready)

    while ready:
        now, root, _, g = heapq.heappop(ready)
        queue = queues[g.level]
        if not g.is_remainder and queue:
            task = queue.popleft()
            end = now + task.duration
            timeline.assignments.append(Assignment(now, task.id, g.level, root))
            timeline.activities.append(Activity(task.id, g.level, g.members, now, end))
            heapq.heappush(ready, (end, root, seq, g))
            seq += 1
            continue
        for child in family.children(g):
            heapq.heappush(ready, (now, child.root, seq, child))
            seq += 1

    timeline.makespan = max((a.end for a in timeline.activities), default=0.0)
    timeline.iterations = [(0.0, timeline.makespan)]
    return timeline


def idle_before_exhaustion(timeline: Timeline) -> list[Interval]:
    """Idle intervals starting before the last assignment of their iteration."""
    bad = []
    bounds = timeline.iterations or [(0.0, timeline.makespan)]
    last = {k: timeline.last_assignment_time(k) for k in range(len(bounds))}
    for iv in timeline.intervals():
        if iv.kind != "idle":
            continue
        k = _iteration_at(bounds, iv.start)
        if iv.start < last[k]:
            bad.append(iv)
    return bad


def _iteration_at(bounds: list[tuple[float, float]], t: float) -> int:
    for k, (_, end) in enumerate(bounds):
        if t < end:
            return k
    return len(bounds) - 1


def verify_no_idle_before_exhaustion(timeline: Timeline, tasks: Sequence[TaskInstance] = ()) -> bool:
    """True iff every idle interval starts at or after the final assignment.

    Only guaranteed for fully divisible families; on others the result is
    informative.
    """
    return not idle_before_exhaustion(timeline)


def is_fully_divisible(family: PartitionFamily) -> bool:
    return divisibility_class(family.spec) is Divisibility.FULLY_DIVISIBLE
