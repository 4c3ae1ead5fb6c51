"""Weak and strong scaling sweeps over simulated node counts.

Every point is one non-adaptive pass with ``N = C N*`` samples.  In a weak
sweep ``C`` equals the node count; in a strong sweep it is fixed.  The
single-worker reference time is the total work of the point's own workload
(its active core-seconds), i.e. a serial replay, so ``S = W_T / t_w``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import InvalidArgs
from .estimator import EstimatorConfig
from .metrics import SweepPoint, scale_samples, speedup
from .models import Model
from .partition import PartitionSpec
from .runtime.batching import BatchPolicy
from .runtime.driver import RunConfig, RunReport, run_mlmc
from .runtime.simulate import SimCosts

log = logging.getLogger(__name__)

SWEEPS = ("weak", "strong")
# sample sizes per level at C = 1, finest level last
BASE_SAMPLES = (16384, 1024, 16)


@dataclass(frozen=True)
class SweepConfig:
    kind: str
    nodes: tuple[int, ...]
    q: tuple[int, ...]
    model: Model
    N_star: tuple[int, ...] = BASE_SAMPLES
    node_size: int = 48
    # fixed multiplier for strong sweeps
    C: int = 128
    tolerance: float = 1.0
    batch: BatchPolicy = BatchPolicy()
    comm_limit: int | None = None
    costs: SimCosts = SimCosts()
    seed: int = 0
    refinement_factor: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(int(n) for n in self.nodes))
        object.__setattr__(self, "q", tuple(int(x) for x in self.q))
        object.__setattr__(self, "N_star", tuple(int(x) for x in self.N_star))
        if self.kind not in SWEEPS:
            raise InvalidArgs(f"sweep must be one of {SWEEPS}, got {self.kind!r}")
        if not self.nodes:
            raise InvalidArgs("node list is empty")
        if any(n < 1 for n in self.nodes) or self.node_size < 1 or self.C < 1:
            raise InvalidArgs("node counts, node size and C must be positive")
        if len(self.N_star) != len(self.q):
            raise InvalidArgs(f"{len(self.q)} levels but {len(self.N_star)} base sample sizes")

    def multiplier(self, nodes: int) -> int:
        return nodes if self.kind == "weak" else self.C


def point_config(cfg: SweepConfig, nodes: int) -> RunConfig:
    C = cfg.multiplier(nodes)
    M = len(cfg.q) - 1
    N = scale_samples(cfg.N_star, C)
    est = EstimatorConfig(cfg.tolerance, cfg.refinement_factor, M, M, tuple(N))
    return RunConfig(est, PartitionSpec(nodes * cfg.node_size, cfg.q), cfg.model, cfg.batch,
                     comm_limit=cfg.comm_limit, seed=cfg.seed, costs=cfg.costs, record_messages=False)


def sweep_point(cfg: SweepConfig, nodes: int, report: RunReport) -> SweepPoint:
    split = report.core_time
    serial = split.active
    return SweepPoint(
        p=split.total_processors,
        C=cfg.multiplier(nodes),
        t_w=report.t_w,
        S=speedup(serial, report.t_w),
        A=report.efficiency,
        active=split.active,
        idle=split.idle,
        manage=split.manage,
        estimate=report.estimate,
        achieved_error=report.error_estimate,
    )


@dataclass
class SweepResult:
    config: SweepConfig
    points: list[SweepPoint] = field(default_factory=list)
    reports: list[RunReport] = field(default_factory=list)


def run_sweep(cfg: SweepConfig, *, keep_reports: bool = False,
              progress: Callable[[SweepPoint], None] | None = None) -> SweepResult:
    out = SweepResult(cfg)
    for nodes in cfg.nodes:
        report = run_mlmc(point_config(cfg, nodes))
        pt = sweep_point(cfg, nodes, report)
        log.info("%s sweep: %d nodes, p=%d, t_w=%.4g, S=%.4g, A=%.4f", cfg.kind, nodes, pt.p, pt.t_w, pt.S, pt.A)
        out.points.append(pt)
        if keep_reports:
            out.reports.append(report)
        if progress is not None:
            progress(pt)
    return out


def ideal_ratio_gaps(points: Sequence[SweepPoint], nodes: Sequence[int]) -> list[float]:
    """Relative gap of S(p)/S(first) from the node ratio, per point."""
    base_S, base_n = points[0].S, nodes[0]
    return [abs((pt.S / base_S) / (n / base_n) - 1.0) for pt, n in zip(points, nodes)]
