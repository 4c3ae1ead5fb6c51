"""End-to-end (adaptive) MLMC runs on top of the duty protocol."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace

from ..accumulate import LevelAccumulator
from ..errors import InsufficientLevels, InsufficientSamples, InvalidArgs, ModelFailure
from ..estimator import (
    EstimatorConfig,
    EstimatorState,
    LevelStats,
    adaptive_update,
    error_estimate,
    sample_variance,
    telescoping_estimate,
)
from ..metrics import CoreTimeSplit, efficiency
from ..models import Model
from ..partition import PartitionFamily, PartitionSpec, build_family
from ..timeline import Timeline
from .batching import BatchPolicy, CoordinatorTree, build_coordinator_tree
from .messages import LogEntry
from .protocol import IterationPlan, Topology
from .simulate import IterationOutcome, SimCosts, simulate_iteration

log = logging.getLogger(__name__)

MODES = ("simulate", "execute")


@dataclass(frozen=True)
class RunConfig:
    estimator: EstimatorConfig
    partition: PartitionSpec
    model: Model
    batch: BatchPolicy = BatchPolicy()
    # max children per coordinator; None runs a single master
    comm_limit: int | None = None
    seed: int = 0
    mode: str = "simulate"
    adaptive: bool = False
    costs: SimCosts = SimCosts()
    max_iterations: int = 20
    record_messages: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidArgs(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.estimator.M != self.partition.M:
            raise InvalidArgs(
                f"estimator allows {self.estimator.M + 1} levels but the partition has {self.partition.M + 1}"
            )
        top = self.model.max_level()
        if top is not None and top < self.estimator.M:
            raise InvalidArgs(f"{self.model.name} model defines levels 0..{top}, run needs 0..{self.estimator.M}")
        if self.comm_limit is not None and self.comm_limit < 2:
            raise InvalidArgs("comm_limit must be at least 2")
        if self.max_iterations < 1:
            raise InvalidArgs("max_iterations must be at least 1")


@dataclass(frozen=True)
class LevelReport:
    l: int
    N: int
    mean_Y: float
    var_Y: float
    mean_cost: float


@dataclass
class RunReport:
    estimate: float
    tolerance: float
    levels: list[LevelReport]
    t_w: float
    core_time: CoreTimeSplit
    efficiency: float
    iterations: int
    seed: int
    mode: str
    converged: bool
    error_estimate: float | None
    stop_reason: str
    state: EstimatorState
    timeline: Timeline
    log: list[LogEntry] = field(default_factory=list)
    # per iteration: (L, targets, counts after the iteration)
    history: list[dict] = field(default_factory=list)
    sums: list[LevelAccumulator] = field(default_factory=list)
    duties: list[dict[int, list[int]]] = field(default_factory=list)
    coordinators: int = 1

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "tolerance": self.tolerance,
            "levels": [vars(lv).copy() for lv in self.levels],
            "t_w": self.t_w,
            "core_time": self.core_time.to_dict(),
            "efficiency": self.efficiency,
            "iterations": self.iterations,
            "seed": self.seed,
            "mode": self.mode,
            "converged": self.converged,
            "error_estimate": self.error_estimate,
            "stop_reason": self.stop_reason,
            "processors": self.core_time.total_processors,
        }

    def to_json(self, **kw) -> str:
        kw.setdefault("indent", 2)
        kw.setdefault("sort_keys", True)
        return json.dumps(self.to_dict(), **kw)

    def log_lines(self) -> str:
        return "\n".join(json.dumps(e.to_dict(), sort_keys=True) for e in self.log)


def coordinator_tree(family: PartitionFamily, comm_limit: int | None) -> CoordinatorTree | None:
    if comm_limit is None:
        return None
    roots = len(family.levels[family.M])
    tree = build_coordinator_tree(roots, comm_limit, first_id=family.spec.p + 1)
    return tree if tree.size > 1 else None


def _stats(acc: list[LevelAccumulator], L: int) -> tuple[LevelStats, ...]:
    return tuple(LevelStats.from_accumulator(acc[l]) for l in range(L + 1))


def _run_iteration(cfg: RunConfig, topo: Topology, plan: IterationPlan, t0: float, k: int) -> IterationOutcome:
    if cfg.mode == "simulate":
        return simulate_iteration(topo, cfg.model, cfg.seed, plan, cfg.batch, cfg.costs,
                                  t0=t0, iteration=k, record_messages=cfg.record_messages)
    from .execute import execute_iteration

    return execute_iteration(topo, cfg.model, cfg.seed, plan, cfg.batch,
                             t0=t0, iteration=k, record_messages=cfg.record_messages)


def run_mlmc(cfg: RunConfig) -> RunReport:
    family = build_family(cfg.partition)
    tree = coordinator_tree(family, cfg.comm_limit)
    topo = Topology(family, tree)
    est = cfg.estimator
    M = est.M

    totals = [LevelAccumulator(l) for l in range(M + 1)]
    L = est.initial_levels
    targets = list(est.initial_samples)
    outcomes: list[IterationOutcome] = []
    history: list[dict] = []
    t = 0.0
    converged = False
    stop = "single_pass"
    err_value: float | None = None
    state = EstimatorState(est, L)

    for k in range(cfg.max_iterations):
        counts = [a.count for a in totals]
        plan = IterationPlan.from_counts(counts, targets, M + 1)
        try:
            out = _run_iteration(cfg, topo, plan, t, k)
        except ModelFailure as exc:
            exc.partial_report = _partial(cfg, totals, L, outcomes, history)
            raise
        outcomes.append(out)
        for l in range(M + 1):
            totals[l].merge(out.sums[l])
        t = out.end
        state = EstimatorState(est, L, _stats(totals, L), state.decay_c, state.decay_alpha)
        history.append({"iteration": k, "L": L, "targets": list(targets[: L + 1]),
                        "counts": [a.count for a in totals[: L + 1]], "start": out.start, "end": out.end})
        if not cfg.adaptive:
            break

        upd = adaptive_update(state)
        state = replace(state, decay_c=upd.decay_c, decay_alpha=upd.decay_alpha)
        err_value = upd.error.total
        history[-1]["error"] = err_value
        log.info("iteration %d: L=%d error=%.4g required L=%d", k, L, err_value, upd.required_L)
        if upd.converged:
            converged, stop = True, "converged"
            break
        counts = [a.count for a in totals]
        need_more = any(upd.new_N[l] > (counts[l] if l < len(counts) else 0) for l in range(upd.new_L + 1))
        if upd.new_L == L and not need_more:
            # sampling targets met but the error is still too large: only
            # more levels would help and the hierarchy has none left
            stop = "level_limit"
            break
        L = upd.new_L
        targets = [max(n, counts[l]) for l, n in enumerate(upd.new_N)]
        stop = "max_iterations"

    if not cfg.adaptive:
        err_value = _error_or_none(state)
        converged = err_value is not None and err_value <= est.tolerance
    return _report(cfg, topo, state, totals, L, outcomes, history, t, converged, err_value, stop)


def _error_or_none(state: EstimatorState) -> float | None:
    try:
        return error_estimate(state).total
    except (InsufficientSamples, InsufficientLevels):
        return None


def _level_reports(totals: list[LevelAccumulator], L: int) -> list[LevelReport]:
    out = []
    for l in range(L + 1):
        st = LevelStats.from_accumulator(totals[l])
        if st.count == 0:
            out.append(LevelReport(l, 0, math.nan, math.nan, math.nan))
            continue
        var = sample_variance(st) if st.count >= 2 else 0.0
        out.append(LevelReport(l, st.count, st.mean, var, st.mean_cost))
    return out


def _timeline(cfg: RunConfig, topo: Topology, outcomes: list[IterationOutcome], t_w: float) -> Timeline:
    tl = Timeline(cfg.partition.p, cfg.partition.q, coordinators=tuple(topo.coordinators))
    for out in outcomes:
        tl.activities.extend(out.activities)
        tl.assignments.extend(out.assignments)
        tl.iterations.append((out.start, out.end))
    tl.makespan = t_w
    return tl


def _report(cfg, topo, state, totals, L, outcomes, history, t_w, converged, err_value, stop) -> RunReport:
    tl = _timeline(cfg, topo, outcomes, t_w)
    active = tl.active_core_time()
    idle = tl.idle_core_time()
    manage = tl.manage_core_time()
    split = CoreTimeSplit(active, idle, manage, tl.total_processors, t_w)
    try:
        estimate = telescoping_estimate(state)
    except Exception:  # noqa: BLE001 - empty levels leave the estimate undefined
        estimate = math.nan
    return RunReport(
        estimate=estimate,
        tolerance=cfg.estimator.tolerance,
        levels=_level_reports(totals, L),
        t_w=t_w,
        core_time=split,
        efficiency=efficiency(split) if t_w > 0 else 0.0,
        iterations=len(outcomes),
        seed=cfg.seed,
        mode=cfg.mode,
        converged=converged,
        error_estimate=err_value,
        stop_reason=stop,
        state=state,
        timeline=tl,
        log=[e for out in outcomes for e in sorted(out.log, key=lambda e: e.time)],
        history=history,
        sums=totals,
        duties=[out.duties for out in outcomes],
        coordinators=len(topo.coordinators),
    )


def _partial(cfg, totals, L, outcomes, history) -> RunReport | None:
    family = build_family(cfg.partition)
    topo = Topology(family, coordinator_tree(family, cfg.comm_limit))
    state = EstimatorState(cfg.estimator, L, _stats(totals, L))
    t = outcomes[-1].end if outcomes else 0.0
    try:
        return _report(cfg, topo, state, totals, L, outcomes, history, t, False, None, "model_failure")
    except Exception:  # noqa: BLE001 - a partial report is best effort
        return None
