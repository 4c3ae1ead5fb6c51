"""Virtual-time execution of one sampling iteration.

All endpoints share one event heap.  Messages arriving at the same instant
are delivered before any coordinator picks its next message, and a
coordinator always serves the earliest arrival first (ties by sender id),
so with zero costs the run replays ``greedy_schedule`` exactly.

Coordinators are serial servers: handling one message takes
``handling_cost`` seconds and its replies leave when handling ends.  Every
message then travels for ``latency`` seconds.  Roots evaluate a batch as
soon as it arrives and announce themselves again when the last sample of
the batch finishes.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

import numpy as np

from ..accumulate import LevelAccumulator
from ..errors import InvalidArgs, ModelFailure
from ..models import Model
from ..timeline import Activity, Assignment
from .batching import BatchPolicy
from .messages import DoSample, LogEntry, NextPartition, PartialSums, ReadyAtLevel, Shutdown
from .protocol import MASTER, CoordinatorLogic, DutyTracker, IterationPlan, Topology

_ARRIVE, _SERVE = 0, 1


@dataclass(frozen=True)
class SimCosts:
    master_cost: float = 0.0
    # tree coordinators; None means the same as the master
    coordinator_cost: float | None = None
    latency: float = 0.0

    def __post_init__(self):
        vals = (self.master_cost, self.latency, self.coordinator_cost or 0.0)
        if any(v < 0 for v in vals):
            raise InvalidArgs("simulation costs must be nonnegative")

    def handling(self, cid: int) -> float:
        if cid == MASTER or self.coordinator_cost is None:
            return self.master_cost
        return self.coordinator_cost


@dataclass
class IterationOutcome:
    start: float
    end: float
    sums: list[LevelAccumulator]
    activities: list[Activity] = field(default_factory=list)
    assignments: list[Assignment] = field(default_factory=list)
    log: list[LogEntry] = field(default_factory=list)
    # levels of the duties each rank received, in order
    duties: dict[int, list[int]] = field(default_factory=dict)


def evaluate_batch_checked(model: Model, level: int, first: int, last: int, seed: int):
    """Batch evaluation that pins a failure on the first failing sample.

    A non-finite QoI or duration counts as a failure too: it would poison
    the sums without any other trace.
    """
    try:
        b = model.evaluate_batch(level, first, last, seed)
    except Exception as exc:  # noqa: BLE001 - any model error is reported the same way
        for i in range(first, last + 1):
            try:
                model.evaluate_batch(level, i, i, seed)
            except Exception as inner:  # noqa: BLE001
                raise ModelFailure(level, i, inner) from inner
        raise ModelFailure(level, first, exc) from exc
    check_finite(b)
    return b


def check_finite(b) -> None:
    ok = np.isfinite(b.y) & np.isfinite(b.duration)
    if not ok.all():
        i = int(np.argmin(ok))
        raise ModelFailure(b.level, b.first + i, FloatingPointError("non-finite sample value"))


class _Simulator:
    def __init__(self, topo: Topology, model: Model, seed: int, plan: IterationPlan,
                 policy: BatchPolicy, costs: SimCosts, t0: float, iteration: int, record: bool):
        self.topo = topo
        self.family = topo.family
        self.q = self.family.spec.q
        self.model = model
        self.seed = seed
        self.costs = costs
        self.t0 = t0
        self.iteration = iteration
        self.record = record
        self.coords = {c: CoordinatorLogic(c, topo, plan, policy) for c in topo.coordinators}
        self.inbox: dict[int, list] = {c: [] for c in topo.coordinators}
        self.busy_until = {c: t0 for c in topo.coordinators}
        self.scheduled = {c: False for c in topo.coordinators}
        self.tracker = DutyTracker(self.family)
        self.acc: dict[int, list[LevelAccumulator]] = {}
        self.heap: list = []
        self.seq = itertools.count()
        self.out = IterationOutcome(t0, t0, [])

    def send(self, t: float, src: int, dst: int, msg) -> None:
        if self.record:
            self.out.log.append(LogEntry(t, src, dst, msg, self.iteration))
        heapq.heappush(self.heap, (t + self.costs.latency, _ARRIVE, src, next(self.seq), dst, msg))

    def announce(self, t: float, group) -> None:
        self.tracker.enter(group)
        self.tracker.sent_ready(group.root, group.level)
        self.send(t, group.root, self.topo.coordinator_of(group.root), ReadyAtLevel(group.root, group.level))

    def run(self) -> IterationOutcome:
        for g in self.family.levels[self.topo.M]:
            self.announce(self.t0, g)
        end = None
        while self.heap:
            t, kind, key, _, a, b = heapq.heappop(self.heap)
            if kind == _ARRIVE:
                if self.topo.is_coordinator(a):
                    heapq.heappush(self.inbox[a], (t, key, next(self.seq), b))
                    if not self.scheduled[a]:
                        self.scheduled[a] = True
                        heapq.heappush(self.heap, (max(t, self.busy_until[a]), _SERVE, a, next(self.seq), a, None))
                else:
                    self.at_root(t, a, b)
                continue
            # a coordinator starts handling its next message
            c = a
            _, src, _, msg = heapq.heappop(self.inbox[c])
            logic = self.coords[c]
            outs = logic.handle(src, msg)
            done = t + self.costs.handling(c)
            self.busy_until[c] = done
            for dst, m in outs:
                self.send(done, c, dst, m)
            if c == MASTER and logic.done:
                end = done
            if self.inbox[c]:
                heapq.heappush(self.heap, (done, _SERVE, c, next(self.seq), c, None))
            else:
                self.scheduled[c] = False
        if end is None:
            raise RuntimeError("iteration finished without a final reduction")
        self.out.end = end
        self.out.sums = self.coords[MASTER].sums
        self.out.duties = {r: cur.levels_seen for r, cur in self.tracker.cursor.items()}
        return self.out

    def rank_sums(self, rank: int) -> list[LevelAccumulator]:
        if rank not in self.acc:
            self.acc[rank] = [LevelAccumulator(l) for l in range(self.topo.M + 1)]
        return self.acc[rank]

    def at_root(self, t: float, rank: int, msg) -> None:
        group = self.tracker.received(rank, msg)
        coord = self.topo.coordinator_of(rank)
        if isinstance(msg, DoSample):
            l = msg.level
            batch = evaluate_batch_checked(self.model, l, msg.first, msg.last, self.seed)
            q = self.q[l]
            acc = self.rank_sums(rank)[l]
            acts, asg = self.out.activities, self.out.assignments
            now = t
            for k, (y, d) in enumerate(zip(batch.y.tolist(), batch.duration.tolist())):
                idx = msg.first + k
                end = now + d
                asg.append(Assignment(now, idx, l, rank, self.iteration))
                acts.append(Activity(idx, l, group.members, now, end, self.iteration))
                acc.add(y, d * q)
                now = end
            self.tracker.sent_ready(rank, l)
            self.send(now, rank, coord, ReadyAtLevel(rank, l))
        elif isinstance(msg, NextPartition):
            if msg.level == 0:
                sums = tuple(a.copy() for a in self.rank_sums(rank))
                self.send(t, rank, coord, PartialSums(rank, sums))
            else:
                for child in self.family.children(group):
                    self.announce(t, child)
        elif not isinstance(msg, Shutdown):
            raise TypeError(f"unexpected message {msg!r}")


def simulate_iteration(topo: Topology, model: Model, seed: int, plan: IterationPlan,
                       policy: BatchPolicy = BatchPolicy(), costs: SimCosts = SimCosts(), *,
                       t0: float = 0.0, iteration: int = 0, record_messages: bool = True) -> IterationOutcome:
    return _Simulator(topo, model, seed, plan, policy, costs, t0, iteration, record_messages).run()
