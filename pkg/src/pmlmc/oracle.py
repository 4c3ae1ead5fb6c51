"""Exact minimum makespan for small rigid-task instances.

Tasks need ``procs`` processors at once and any subset of the ``p``
processors will do, so only the number of busy processors matters at each
instant.  Some optimal schedule starts every task at time 0 or at the
completion of another task, which gives a finite search: at each decision
instant either start one more task that fits or let time run to the next
completion; only active schedules are enumerated, so time is allowed to
run only while some remaining task is too wide to start.  The search is a depth-first branch-and-bound seeded with an
upper bound (the greedy makespan when verifying), pruned by work, longest
task and width-packing lower bounds, and by decision states already
expanded at an earlier or equal elapsed time.

When every task has the same width q the instance is plain identical
machine scheduling on p // q machines and a classic assignment
branch-and-bound is used instead.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .errors import ApproximationViolation, InstanceTooLarge, InvalidArgs, UnschedulableTask
from .partition import PartitionFamily
from .scheduler import TaskInstance, greedy_schedule, is_fully_divisible

MAX_TASKS = 10
MAX_PROCS = 8
_TOL = 1e-12
# residual times are rounded to this many decimals in memo keys; identical
# states reached along different paths differ only by float rounding
_KEY_DIGITS = 9


def _identical_machines(durations: Sequence[float], machines: int, upper: float) -> float:
    jobs = sorted(durations, reverse=True)
    lower = max(jobs[0], sum(jobs) / machines)
    best = [upper]
    loads = [0.0] * machines

    def place(i: int, cur: float) -> bool:
        if i == len(jobs):
            best[0] = cur
            return best[0] <= lower * (1 + _TOL)
        w = jobs[i]
        tried = set()
        for m in range(machines):
            load = loads[m]
            if load in tried:
                continue
            tried.add(load)
            new = load + w
            if max(cur, new) >= best[0] * (1 - _TOL):
                continue
            loads[m] = new
            done = place(i + 1, max(cur, new))
            loads[m] = load
            if done:
                return True
        return False

    if best[0] > lower * (1 + _TOL):
        place(0, 0.0)
    return best[0]


def _width_bound(by_width: list[float], p: int) -> float:
    """Tasks wider than p/(k+1) overlap at most k at a time.

    ``by_width[q]`` is the total duration of tasks of width q.
    """
    best = 0.0
    total = 0.0
    q = p
    for k in range(1, p + 1):
        while q * (k + 1) > p:
            total += by_width[q]
            q -= 1
        best = max(best, total / k)
    return best


def _rigid_tasks(kinds: list[tuple[int, float]], counts: tuple[int, ...], p: int, upper: float) -> float:
    widths = [q for q, _ in kinds]
    lengths = [w for _, w in kinds]
    best = [upper]
    # state -> smallest elapsed time at which it has been expanded
    seen: dict[tuple, float] = {}

    def bound(elapsed: float, remaining: tuple[int, ...], running: tuple[tuple[float, int], ...]) -> float:
        by_width = [0.0] * (p + 1)
        longest = 0.0
        for k, c in enumerate(remaining):
            if c:
                by_width[widths[k]] += c * lengths[k]
                longest = max(longest, lengths[k])
        for r, q in running:
            by_width[q] += r
            longest = max(longest, r)
        work = sum(q * w for q, w in enumerate(by_width))
        return elapsed + max(longest, work / p, _width_bound(by_width, p))

    def search(elapsed: float, remaining: tuple[int, ...], running: tuple[tuple[float, int], ...],
               first: int, forbid: int) -> None:
        if not any(remaining):
            best[0] = min(best[0], elapsed + max((r for r, _ in running), default=0.0))
            return
        if bound(elapsed, remaining, running) >= best[0] * (1 - _TOL):
            return
        key = (remaining, tuple((round(r, _KEY_DIGITS), q) for r, q in running), first, forbid)
        prev = seen.get(key)
        if prev is not None and prev <= elapsed + _TOL:
            return
        seen[key] = elapsed
        free = p - sum(q for _, q in running)
        # tasks started at the same instant are taken in kind order; a task
        # no wider than ``forbid`` could have started one instant earlier
        for k in range(first, len(kinds)):
            if remaining[k] and forbid < widths[k] <= free:
                rem = remaining[:k] + (remaining[k] - 1,) + remaining[k + 1:]
                run = tuple(sorted(running + ((lengths[k], widths[k]),)))
                search(elapsed, rem, run, k, forbid)
        # waiting only pays off when something is too wide to start now
        if running and any(c and widths[k] > free for k, c in enumerate(remaining)):
            step = running[0][0]
            later = []
            for r, q in running[1:]:
                left = r - step
                # tasks ending within rounding of ``step`` finish with it
                if left > _TOL * max(1.0, step):
                    later.append((left, q))
            search(elapsed + step, remaining, tuple(later), 0, free)

    search(0.0, counts, (), 0, 0)
    return best[0]


def optimal_makespan_bruteforce(tasks: Sequence[TaskInstance], p: int, *,
                                max_tasks: int = MAX_TASKS, max_procs: int = MAX_PROCS,
                                upper_bound: float | None = None) -> float:
    if len(tasks) > max_tasks or p > max_procs:
        raise InstanceTooLarge(f"{len(tasks)} tasks on {p} processors exceeds caps ({max_tasks}, {max_procs})")
    if not tasks:
        return 0.0
    if any(t.procs > p for t in tasks):
        raise UnschedulableTask("a task needs more processors than available")

    widths = {t.procs for t in tasks}
    if len(widths) == 1:
        machines = p // widths.pop()
        upper = sum(t.duration for t in tasks) if upper_bound is None else upper_bound
        return _identical_machines([t.duration for t in tasks], machines, upper)

    kinds = sorted(Counter((t.procs, t.duration) for t in tasks).items(), reverse=True)
    # a serial schedule is always feasible; the search only reports improvements on it
    upper = sum(t.duration for t in tasks) * (1 + 1e-9) if upper_bound is None else upper_bound * (1 + 1e-9)
    return _rigid_tasks([k for k, _ in kinds], tuple(c for _, c in kinds), p, upper)


@dataclass(frozen=True)
class ApproximationCheck:
    greedy: float
    opt: float
    ratio: float


def verify_two_approximation(tasks: Sequence[TaskInstance], family: PartitionFamily) -> ApproximationCheck:
    if not is_fully_divisible(family):
        raise InvalidArgs("the 2-approximation guarantee needs a fully divisible family")
    greedy = greedy_schedule(tasks, family).makespan
    opt = optimal_makespan_bruteforce(tasks, family.spec.p, upper_bound=greedy)
    ratio = greedy / opt if opt > 0 else 1.0
    if ratio >= 2 + 1e-12:
        raise ApproximationViolation(f"greedy {greedy} vs optimum {opt}: ratio {ratio}")
    return ApproximationCheck(greedy, opt, ratio)
