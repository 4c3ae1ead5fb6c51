"""Threaded execution of one sampling iteration.

Every worker rank and every coordinator is a thread with its own inbox
queue; endpoints share nothing but messages.  A group root talks to its
coordinator and relays each duty to the other members of its group, who
wait on a group barrier until the batch is done.  Pause-like models really
sleep for their duration; other models are timed as they run.

Times in the outcome are wall-clock seconds since the iteration started,
offset by ``t0``.
"""

from __future__ import annotations

import queue
import threading
import time

from ..accumulate import LevelAccumulator
from ..errors import ModelFailure, PmlmcError
from ..models import Model
from ..partition import group_of
from ..timeline import Activity, Assignment
from .batching import BatchPolicy
from .messages import DoSample, LogEntry, NextPartition, PartialSums, ReadyAtLevel, Shutdown
from .protocol import MASTER, CoordinatorLogic, DutyTracker, IterationPlan, Topology
from .simulate import IterationOutcome, check_finite

_STOP = object()
# seconds to wait for the iteration before declaring the run hung
DEFAULT_TIMEOUT = 600.0


class _Abort(Exception):
    pass


class _Executor:
    def __init__(self, topo: Topology, model: Model, seed: int, plan: IterationPlan,
                 policy: BatchPolicy, t0: float, iteration: int, record: bool):
        self.topo = topo
        self.family = topo.family
        self.model = model
        self.seed = seed
        self.plan = plan
        self.policy = policy
        self.t0 = t0
        self.iteration = iteration
        self.record = record
        self.p = self.family.spec.p
        endpoints = list(topo.coordinators) + list(range(1, self.p + 1))
        self.inbox: dict[int, queue.Queue] = {e: queue.Queue() for e in endpoints}
        self.lock = threading.Lock()
        self.tracker = DutyTracker(self.family)
        self.out = IterationOutcome(t0, t0, [])
        self.errors: list[BaseException] = []
        self.failed = threading.Event()
        self.finished = threading.Event()
        self.barriers = {}
        for groups in self.family.levels:
            for g in groups:
                if g.size > 1:
                    self.barriers[(g.level, g.root)] = threading.Barrier(g.size)
        self.clock0 = 0.0

    def now(self) -> float:
        return self.t0 + (time.perf_counter() - self.clock0)

    def send(self, src: int, dst: int, msg) -> None:
        if self.record:
            entry = LogEntry(self.now(), src, dst, msg, self.iteration)
            with self.lock:
                self.out.log.append(entry)
        self.inbox[dst].put((src, msg))

    def receive(self, endpoint: int):
        item = self.inbox[endpoint].get()
        if item is _STOP:
            raise _Abort()
        return item

    def fail(self, exc: BaseException) -> None:
        with self.lock:
            self.errors.append(exc)
        if not self.failed.is_set():
            self.failed.set()
            for qu in self.inbox.values():
                qu.put(_STOP)
            for b in self.barriers.values():
                b.abort()

    def guarded(self, fn, *args):
        try:
            fn(*args)
        except (_Abort, threading.BrokenBarrierError):
            pass
        except BaseException as exc:  # noqa: BLE001 - surfaced by run()
            self.fail(exc)

    # -- endpoints

    def coordinator(self, cid: int) -> None:
        logic = CoordinatorLogic(cid, self.topo, self.plan, self.policy)
        while not logic.done:
            src, msg = self.receive(cid)
            for dst, m in logic.handle(src, msg):
                self.send(cid, dst, m)
        if cid == MASTER:
            self.out.end = self.now()
            self.out.sums = logic.sums
            self.finished.set()

    def rank(self, r: int) -> None:
        group = group_of(self.family, r, self.topo.M)
        coord = self.topo.coordinator_of(r)
        sums = [LevelAccumulator(l) for l in range(self.topo.M + 1)]
        entered = None
        while True:
            level = group.level
            if group.root == r:
                with self.lock:
                    if entered is not group:
                        self.tracker.enter(group)
                        entered = group
                    self.tracker.sent_ready(r, level)
                self.send(r, coord, ReadyAtLevel(r, level))
                _, msg = self.receive(r)
                with self.lock:
                    self.tracker.received(r, msg)
                for m in group.members:
                    if m != r:
                        self.inbox[m].put((r, msg))
                if isinstance(msg, DoSample):
                    self.sample(group, msg, sums[level])
            else:
                _, msg = self.receive(r)
            if isinstance(msg, DoSample):
                if group.size > 1:
                    self.barriers[(level, group.root)].wait()
                continue
            if isinstance(msg, Shutdown):
                return
            if isinstance(msg, NextPartition):
                if level == 0:
                    if group.root == r:
                        self.send(r, coord, PartialSums(r, tuple(a.copy() for a in sums)))
                    return
                group = group_of(self.family, r, level - 1)
                continue
            raise PmlmcError(f"rank {r} cannot handle {msg!r}")

    def sample(self, group, msg: DoSample, acc: LevelAccumulator) -> None:
        l = msg.level
        q = self.family.spec.q[l]
        sleep = self.model.timing == "sleep"
        acts, asg = [], []
        for idx in range(msg.first, msg.last + 1):
            start = self.now()
            try:
                b = self.model.evaluate_batch(l, idx, idx, self.seed)
            except Exception as exc:  # noqa: BLE001
                raise ModelFailure(l, idx, exc) from exc
            check_finite(b)
            if sleep:
                time.sleep(float(b.duration[0]))
            end = self.now()
            acc.add(float(b.y[0]), (end - start) * q)
            asg.append(Assignment(start, idx, l, group.root, self.iteration))
            acts.append(Activity(idx, l, group.members, start, end, self.iteration))
        with self.lock:
            self.out.activities.extend(acts)
            self.out.assignments.extend(asg)

    # -- driver

    def run(self, timeout: float) -> IterationOutcome:
        threads = [threading.Thread(target=self.guarded, args=(self.coordinator, c), daemon=True)
                   for c in self.topo.coordinators]
        threads += [threading.Thread(target=self.guarded, args=(self.rank, r), daemon=True)
                    for r in range(1, self.p + 1)]
        self.clock0 = time.perf_counter()
        for th in threads:
            th.start()
        deadline = time.monotonic() + timeout
        while not (self.finished.is_set() or self.failed.is_set()):
            if time.monotonic() > deadline:
                self.fail(TimeoutError(f"iteration {self.iteration} did not finish within {timeout}s"))
                break
            self.finished.wait(0.05)
        for th in threads:
            th.join(timeout=5.0)
        if self.errors:
            raise self.errors[0]
        self.out.duties = {r: cur.levels_seen for r, cur in self.tracker.cursor.items()}
        return self.out


def execute_iteration(topo: Topology, model: Model, seed: int, plan: IterationPlan,
                      policy: BatchPolicy = BatchPolicy(), *, t0: float = 0.0, iteration: int = 0,
                      record_messages: bool = True, timeout: float = DEFAULT_TIMEOUT) -> IterationOutcome:
    return _Executor(topo, model, seed, plan, policy, t0, iteration, record_messages).run(timeout)
