"""Protocol state machines shared by the simulated and the threaded runtime.

Endpoints are integers: workers are ranks 1..p, the master is 0 and tree
coordinators are p+1, p+2, ...  A group talks to the coordinator serving
its level-M ancestor (the master when there is no tree).

A coordinator owns a pool of sample ranges per level.  The master's pool
is the whole iteration; other coordinators ask their parent for ranges
with ``ReadyAtLevel`` and keep at most one such request open per level.
Roots get batches sized by ``batch_size``, child coordinators get ranges
sized by ``tree_batch_size``; neither crosses the end of a range held in
the pool.  Once the parent is out of work for a level (``NextPartition``)
every waiting and future request for that level is answered with
``NextPartition`` too.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

from ..accumulate import LevelAccumulator
from ..errors import ProtocolViolation
from ..partition import Group, PartitionFamily, group_of
from .batching import BatchPolicy, CoordinatorTree, batch_size, tree_batch_size
from .messages import DoSample, NextPartition, PartialSums, ReadyAtLevel, Shutdown

MASTER = 0


@dataclass(frozen=True)
class IterationPlan:
    """New sample ranges per level: ``ranges[l] = (first, last)`` or None."""

    ranges: tuple[tuple[int, int] | None, ...]

    @classmethod
    def from_counts(cls, done: list[int], targets: list[int], levels: int) -> "IterationPlan":
        out = []
        for l in range(levels):
            n = done[l] if l < len(done) else 0
            N = targets[l] if l < len(targets) else 0
            out.append((n + 1, N) if N > n else None)
        return cls(tuple(out))

    def size(self, level: int) -> int:
        r = self.ranges[level]
        return 0 if r is None else r[1] - r[0] + 1


class Topology:
    """Static routing facts for one family and (optional) tree."""

    def __init__(self, family: PartitionFamily, tree: CoordinatorTree | None):
        self.family = family
        self.tree = tree
        self.p = family.spec.p
        self.M = family.M
        top = family.levels[self.M]
        if tree is None:
            self.coordinators = (MASTER,)
            self._leaf = {k: MASTER for k in range(len(top))}
            self.parent = {MASTER: None}
            self.children = {MASTER: []}
        else:
            self.coordinators = tuple(tree.nodes)
            self._leaf = tree.leaf_of_root()
            self.parent = {i: n.parent for i, n in tree.nodes.items()}
            self.children = {i: list(n.children) for i, n in tree.nodes.items()}
        self._top_index = family._index[self.M]

    def coordinator_of(self, rank: int) -> int:
        return self._leaf[self._top_index[rank]]

    def is_coordinator(self, endpoint: int) -> bool:
        return endpoint == MASTER or endpoint > self.p

    def _chain(self, c: int):
        while c is not None:
            yield c
            c = self.parent[c]

    @cached_property
    def partitions(self) -> dict[int, list[int]]:
        """P_l(i): full level-l groups served by coordinator i or its subtree."""
        out = {c: [0] * (self.M + 1) for c in self.coordinators}
        for l in range(self.M + 1):
            for g in self.family.full_groups(l):
                for c in self._chain(self.coordinator_of(g.root)):
                    out[c][l] += 1
        return out

    @cached_property
    def total_partitions(self) -> list[int]:
        return [len(self.family.full_groups(l)) for l in range(self.M + 1)]

    @cached_property
    def expected_sums(self) -> dict[int, int]:
        """PartialSums messages each coordinator waits for per iteration."""
        out = {c: len(self.children[c]) for c in self.coordinators}
        for g in self.family.full_groups(0):
            out[self.coordinator_of(g.root)] += 1
        return out


class CoordinatorLogic:
    """One coordinator's reaction to incoming messages for one iteration."""

    def __init__(self, cid: int, topo: Topology, plan: IterationPlan, policy: BatchPolicy):
        self.id = cid
        self.topo = topo
        self.plan = plan
        self.policy = policy
        self.parent = topo.parent[cid]
        levels = topo.M + 1
        self.pool: list[deque[list[int]]] = [deque() for _ in range(levels)]
        self.exhausted = [self.parent is None] * levels
        self.requested = [False] * levels
        self.pending: list[deque[int]] = [deque() for _ in range(levels)]
        self.sums = [LevelAccumulator(l) for l in range(levels)]
        self.received = 0
        self.done = False
        # endpoints holding an open ReadyAtLevel
        self._open: set[int] = set()
        if self.parent is None:
            for l, r in enumerate(plan.ranges):
                if r is not None:
                    self.pool[l].append([r[0], r[1]])

    # -- helpers

    def _take(self, level: int, size: int) -> DoSample:
        rng = self.pool[level][0]
        first = rng[0]
        last = min(first + size - 1, rng[1])
        if last == rng[1]:
            self.pool[level].popleft()
        else:
            rng[0] = last + 1
        return DoSample(level, first, last)

    def _size_for(self, requester: int, level: int) -> int:
        N = self.plan.size(level)
        P_total = self.topo.total_partitions[level]
        if self.topo.is_coordinator(requester):
            P_i = self.topo.partitions[requester][level]
            return tree_batch_size(0, N, max(P_i, 1), P_total, self.policy,
                                   scale_clamps=self.policy.scale_tree_clamps)
        # the raw term never exceeds one, so progress n only enters through
        # the remaining-samples cap, which the range cap in _take enforces
        return batch_size(0, N, P_total, self.policy)

    def _request(self, level: int) -> list[tuple[int, object]]:
        if self.parent is None or self.exhausted[level] or self.requested[level]:
            return []
        self.requested[level] = True
        return [(self.parent, ReadyAtLevel(self.id, level, self.topo.partitions[self.id][level]))]

    def _reply(self, dst: int, msg) -> tuple[int, object]:
        self._open.discard(dst)
        return dst, msg

    def _drain(self, level: int) -> list[tuple[int, object]]:
        out = []
        q = self.pending[level]
        while q and self.pool[level]:
            dst = q.popleft()
            out.append(self._reply(dst, self._take(level, self._size_for(dst, level))))
        if q and self.exhausted[level] and not self.pool[level]:
            while q:
                out.append(self._reply(q.popleft(), NextPartition(level)))
        if not self.pool[level]:
            # keep one request open so the next batch is already on its way
            out.extend(self._request(level))
        return out

    # -- entry point

    def handle(self, src: int, msg) -> list[tuple[int, object]]:
        if isinstance(msg, ReadyAtLevel):
            return self._on_ready(src, msg)
        if isinstance(msg, DoSample):
            return self._on_grant(src, msg)
        if isinstance(msg, NextPartition):
            return self._on_exhausted(src, msg)
        if isinstance(msg, PartialSums):
            return self._on_sums(src, msg)
        raise ProtocolViolation(f"coordinator {self.id} cannot handle {type(msg).__name__}")

    def _on_ready(self, src: int, msg: ReadyAtLevel) -> list[tuple[int, object]]:
        l = msg.level
        if not 0 <= l <= self.topo.M:
            raise ProtocolViolation(f"ReadyAtLevel for level {l} from {src}")
        if src in self._open:
            raise ProtocolViolation(f"endpoint {src} sent ReadyAtLevel with a duty outstanding")
        if self.topo.is_coordinator(src):
            if self.topo.parent.get(src) != self.id:
                raise ProtocolViolation(f"coordinator {src} is not a child of {self.id}")
        else:
            g = group_of(self.topo.family, src, l)
            if g.root != src:
                raise ProtocolViolation(f"rank {src} is not the root of its level-{l} group")
            if self.topo.coordinator_of(src) != self.id:
                raise ProtocolViolation(f"rank {src} belongs to coordinator {self.topo.coordinator_of(src)}")
            if g.size < self.topo.family.spec.q[0]:
                return [(src, Shutdown(l))]
            if g.is_remainder:
                return [(src, NextPartition(l))]
        self._open.add(src)
        self.pending[l].append(src)
        return self._drain(l)

    def _on_grant(self, src: int, msg: DoSample) -> list[tuple[int, object]]:
        if src != self.parent or not self.requested[msg.level]:
            raise ProtocolViolation(f"coordinator {self.id} got an unrequested range from {src}")
        self.requested[msg.level] = False
        pool = self.pool[msg.level]
        if pool and pool[-1][1] + 1 == msg.first:
            pool[-1][1] = msg.last
        else:
            pool.append([msg.first, msg.last])
        return self._drain(msg.level)

    def _on_exhausted(self, src: int, msg: NextPartition) -> list[tuple[int, object]]:
        if src != self.parent or not self.requested[msg.level]:
            raise ProtocolViolation(f"coordinator {self.id} got an unrequested NextPartition from {src}")
        self.requested[msg.level] = False
        self.exhausted[msg.level] = True
        return self._drain(msg.level)

    def _on_sums(self, src: int, msg: PartialSums) -> list[tuple[int, object]]:
        if self.done:
            raise ProtocolViolation(f"coordinator {self.id} got PartialSums after completing")
        for acc in msg.sums:
            self.sums[acc.level].merge(acc)
        self.received += 1
        expected = self.topo.expected_sums[self.id]
        if self.received < expected:
            return []
        self.done = True
        if self.parent is None:
            return []
        return [(self.parent, PartialSums(self.id, tuple(a.copy() for a in self.sums)))]


@dataclass
class GroupCursor:
    """Where a rank currently stands: its group and the duties it has seen."""

    group: Group
    waiting: bool = False
    levels_seen: list[int] = field(default_factory=list)


class DutyTracker:
    """Fail-fast checks on what roots receive.

    Every ReadyAtLevel gets exactly one reply, roots only sample at the
    level of their current group, and levels never go back up.
    """

    def __init__(self, family: PartitionFamily):
        self.family = family
        self.cursor: dict[int, GroupCursor] = {}

    def reset(self) -> None:
        self.cursor.clear()

    def enter(self, group: Group) -> None:
        prev = self.cursor.get(group.root)
        if prev is not None and prev.group.level <= group.level:
            raise ProtocolViolation(f"rank {group.root} moved from level {prev.group.level} to {group.level}")
        self.cursor[group.root] = GroupCursor(group)

    def sent_ready(self, rank: int, level: int) -> None:
        cur = self.cursor.get(rank)
        if cur is None or cur.group.level != level:
            raise ProtocolViolation(f"rank {rank} announced level {level} outside its group")
        if cur.waiting:
            raise ProtocolViolation(f"rank {rank} announced twice without a reply")
        cur.waiting = True

    def received(self, rank: int, msg) -> Group:
        cur = self.cursor.get(rank)
        if cur is None or not cur.waiting:
            raise ProtocolViolation(f"rank {rank} got {type(msg).__name__} without asking")
        if msg.level != cur.group.level:
            raise ProtocolViolation(f"rank {rank} at level {cur.group.level} got a level-{msg.level} duty")
        if isinstance(msg, DoSample) and cur.group.is_remainder:
            raise ProtocolViolation(f"remainder group at rank {rank} was asked to sample")
        cur.waiting = False
        cur.levels_seen.append(msg.level)
        return cur.group
