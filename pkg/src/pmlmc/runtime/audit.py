"""Protocol audits computed from a run's message log.

The batch audit checks, per iteration and level, that the DoSample ranges
handed to roots are contiguous, never overlap and cover the iteration's
new samples, and that every batch respects the min/max clamps.  A batch
below the minimum is accepted only when it is the tail of a range its
coordinator held (the "remaining samples" cap).

The descent audit checks that each rank sees levels in non-increasing
order and only moves down one level right after a NextPartition.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..partition import PartitionFamily
from .batching import BatchPolicy, CoordinatorTree
from .messages import DoSample, LogEntry, NextPartition, Shutdown
from .protocol import MASTER, Topology


@dataclass
class AuditReport:
    problems: list[str] = field(default_factory=list)
    batches: int = 0
    short_tails: int = 0

    @property
    def ok(self) -> bool:
        return not self.problems

    def __bool__(self) -> bool:
        return self.ok


def _is_worker(endpoint: int, p: int) -> bool:
    return 1 <= endpoint <= p


def audit_batches(log: Iterable[LogEntry], family: PartitionFamily, policy: BatchPolicy = BatchPolicy(),
                  tree: CoordinatorTree | None = None,
                  expected_totals: Sequence[int] | None = None) -> AuditReport:
    topo = Topology(family, tree)
    p = family.spec.p
    out = AuditReport()
    # (iteration, level) -> list of (first, last, src)
    to_roots: dict[tuple[int, int], list[tuple[int, int, int]]] = defaultdict(list)
    # (iteration, level, coordinator) -> ends of ranges granted to it
    grant_ends: dict[tuple[int, int, int], set[int]] = defaultdict(set)
    grants: dict[tuple[int, int], list[tuple[int, int, int, int]]] = defaultdict(list)
    for e in log:
        if not isinstance(e.msg, DoSample):
            continue
        m = e.msg
        if _is_worker(e.dst, p):
            to_roots[(e.iteration, m.level)].append((m.first, m.last, e.src))
        else:
            grant_ends[(e.iteration, m.level, e.dst)].add(m.last)
            grants[(e.iteration, m.level)].append((m.first, m.last, e.src, e.dst))

    covered: dict[int, int] = defaultdict(int)
    for (k, l) in sorted(to_roots):
        batches = sorted(to_roots[(k, l)])
        out.batches += len(batches)
        first, last = batches[0][0], batches[-1][1]
        if first != covered[l] + 1:
            out.problems.append(f"iteration {k} level {l}: starts at {first}, expected {covered[l] + 1}")
        prev = first - 1
        for a, b, _ in batches:
            if a != prev + 1:
                kind = "overlap" if a <= prev else "gap"
                out.problems.append(f"iteration {k} level {l}: {kind} before batch {a}..{b}")
            prev = max(prev, b)
        covered[l] = last
        ends = {MASTER: {last}}
        N = last - first + 1
        parts = topo.total_partitions[l]
        lo, hi = policy.clamps(N, max(parts, 1))
        for a, b, src in batches:
            size = b - a + 1
            if size > hi:
                out.problems.append(f"iteration {k} level {l}: batch {a}..{b} above max {hi}")
            if size < lo:
                tails = ends.get(src) or grant_ends.get((k, l, src), set())
                if b in tails:
                    out.short_tails += 1
                else:
                    out.problems.append(f"iteration {k} level {l}: batch {a}..{b} below min {lo}")
        for a, b, src, dst in grants.get((k, l), []):
            if not first <= a <= b <= last:
                out.problems.append(f"iteration {k} level {l}: grant {a}..{b} to {dst} outside {first}..{last}")

    if expected_totals is not None:
        for l, n in enumerate(expected_totals):
            if covered[l] != n:
                out.problems.append(f"level {l}: batches cover 1..{covered[l]}, expected 1..{n}")
    return out


def audit_descent(log: Iterable[LogEntry], p: int) -> AuditReport:
    out = AuditReport()
    seen: dict[tuple[int, int], list] = defaultdict(list)
    for e in log:
        if _is_worker(e.dst, p) and not _is_worker(e.src, p):
            seen[(e.iteration, e.dst)].append(e.msg)
    for (k, rank), msgs in sorted(seen.items()):
        for prev, cur in zip(msgs, msgs[1:]):
            if isinstance(prev, Shutdown):
                out.problems.append(f"iteration {k} rank {rank}: message after Shutdown")
            elif cur.level > prev.level:
                out.problems.append(f"iteration {k} rank {rank}: level rose {prev.level} -> {cur.level}")
            elif cur.level < prev.level and (not isinstance(prev, NextPartition) or cur.level != prev.level - 1):
                out.problems.append(f"iteration {k} rank {rank}: jumped {prev.level} -> {cur.level}")
            elif cur.level == prev.level and isinstance(prev, NextPartition):
                out.problems.append(f"iteration {k} rank {rank}: duty at level {cur.level} after NextPartition")
    return out
