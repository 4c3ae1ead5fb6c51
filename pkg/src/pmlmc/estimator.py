"""Multilevel Monte Carlo mathematics.

Telescoping estimate, level count and optimal sample sizes, sample
variance, decay fitting and the adaptive update used by the outer loop.
Everything here is pure: states are frozen and updates build new ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .accumulate import LevelAccumulator
from .errors import (
    DimensionMismatch,
    EmptyLevel,
    InsufficientLevels,
    InsufficientSamples,
    InvalidArgs,
    NonpositiveCost,
)

# log-ratio values within this distance of an integer are snapped before
# taking the ceiling, so that exact powers (log_2 8) do not round up.
_SNAP = 1e-12


@dataclass(frozen=True)
class EstimatorConfig:
    tolerance: float
    refinement_factor: float = 2.0
    max_levels: int = 2
    initial_levels: int = 2
    initial_samples: tuple[int, ...] = (100, 100, 100)
    safety_factor: float = 1.3
    alpha_min: float = 1e-3
    # cost growth exponent used when extrapolating to unsampled levels
    work_exponent: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "initial_samples", tuple(int(n) for n in self.initial_samples))
        if not self.tolerance > 0:
            raise InvalidArgs("tolerance must be positive")
        if not self.refinement_factor > 1:
            raise InvalidArgs("refinement factor must exceed 1")
        if self.max_levels < 0 or not 0 <= self.initial_levels <= self.max_levels:
            raise InvalidArgs("need 0 <= initial_levels <= max_levels")
        if len(self.initial_samples) != self.initial_levels + 1:
            raise InvalidArgs(
                f"initial_samples needs {self.initial_levels + 1} entries, got {len(self.initial_samples)}"
            )
        if any(n < 2 for n in self.initial_samples):
            raise InvalidArgs("every initial sample size must be at least 2")
        if self.safety_factor < 1:
            raise InvalidArgs("safety factor must be >= 1")

    @property
    def s(self) -> float:
        return self.refinement_factor

    @property
    def M(self) -> int:
        return self.max_levels


@dataclass(frozen=True)
class LevelStats:
    level: int
    count: int = 0
    sum_y: float = 0.0
    sum_y2: float = 0.0
    sum_cost: float = 0.0

    @property
    def mean(self) -> float:
        if self.count < 1:
            raise EmptyLevel(f"level {self.level} has no samples")
        return self.sum_y / self.count

    @property
    def mean_cost(self) -> float:
        if self.count < 1:
            raise EmptyLevel(f"level {self.level} has no samples")
        return self.sum_cost / self.count

    @classmethod
    def from_accumulator(cls, acc: LevelAccumulator) -> "LevelStats":
        return cls(acc.level, acc.count, acc.sum_y.value(), acc.sum_y2.value(), acc.sum_cost.value())

    @classmethod
    def from_samples(cls, level: int, ys: Sequence[float], costs: Sequence[float] | None = None) -> "LevelStats":
        acc = LevelAccumulator(level)
        costs = costs if costs is not None else [0.0] * len(ys)
        for y, c in zip(ys, costs):
            acc.add(float(y), float(c))
        return cls.from_accumulator(acc)


@dataclass(frozen=True)
class EstimatorState:
    config: EstimatorConfig
    current_L: int
    per_level: tuple[LevelStats, ...] = field(default=())
    decay_c: float | None = None
    decay_alpha: float | None = None

    def __post_init__(self):
        levels = tuple(self.per_level)
        M = self.config.M
        if self.current_L > M:
            raise InvalidArgs(f"current_L={self.current_L} exceeds max level {M}")
        if len(levels) > M + 1:
            raise InvalidArgs("more level statistics than levels")
        levels = levels + tuple(LevelStats(l) for l in range(len(levels), M + 1))
        for l, st in enumerate(levels):
            if st.level != l:
                raise InvalidArgs(f"per_level[{l}] holds level {st.level}")
        object.__setattr__(self, "per_level", levels)

    @classmethod
    def initial(cls, config: EstimatorConfig) -> "EstimatorState":
        return cls(config, config.initial_levels)

    @property
    def active(self) -> tuple[LevelStats, ...]:
        return self.per_level[: self.current_L + 1]

    def counts(self) -> list[int]:
        return [st.count for st in self.active]


def telescoping_estimate(state: EstimatorState) -> float:
    """Sum of per-level means of Y_l over the active hierarchy."""
    total = 0.0
    for st in state.active:
        if st.count < 1:
            raise EmptyLevel(f"level {st.level} has no samples")
        total += st.sum_y / st.count
    return total


def sample_variance(stats: LevelStats) -> float:
    """Biased (1/n) sample variance from streamed moments, clamped at zero."""
    n = stats.count
    if n < 2:
        raise InsufficientSamples(f"level {stats.level} has {n} samples, need 2")
    mean = stats.sum_y / n
    var = stats.sum_y2 / n - mean * mean
    # cancellation noise on constant samples
    if var <= 1e-15 * max(stats.sum_y2 / n, mean * mean):
        return 0.0
    return var


def _ceil_log_ratio(x: float) -> int:
    r = round(x)
    if abs(x - r) <= _SNAP * max(1.0, abs(x)):
        return int(r)
    return math.ceil(x)


def required_levels(c: float, alpha: float, s: float, eps: float) -> int:
    """Finest level whose bias c s^(-alpha L) stays below eps/sqrt(2)."""
    if not (c > 0 and alpha > 0 and eps > 0 and s > 1):
        raise InvalidArgs("required_levels needs c, alpha, eps > 0 and s > 1")
    x = math.log(math.sqrt(2.0) * c / eps) / (alpha * math.log(s))
    return max(0, _ceil_log_ratio(x))


def optimal_sample_sizes(variances: Sequence[float], costs: Sequence[float], eps: float,
                         floor: int = 1) -> list[int]:
    if len(variances) != len(costs):
        raise DimensionMismatch(f"{len(variances)} variances vs {len(costs)} costs")
    if not eps > 0:
        raise InvalidArgs("eps must be positive")
    if any(not c > 0 for c in costs):
        raise NonpositiveCost("every level cost must be positive")
    if any(v < 0 for v in variances):
        raise InvalidArgs("variances must be nonnegative")
    total = math.fsum(math.sqrt(v * c) for v, c in zip(variances, costs))
    out = []
    for v, c in zip(variances, costs):
        n = math.ceil(2.0 / eps**2 * math.sqrt(v / c) * total) if v > 0 else 0
        out.append(max(n, floor))
    return out


def fit_decay(level_means: Sequence[float], s: float, alpha_min: float = 1e-3) -> tuple[float, float]:
    """Least-squares fit of |mean Y_l| ~ c s^(-alpha l) over levels 1..L.

    Level 0 is skipped (it carries E[Q_0], not a correction) as are zero
    means.  Returns ``(c, alpha)`` with alpha clamped below at ``alpha_min``.
    """
    pts = [(l, abs(m)) for l, m in enumerate(level_means) if l >= 1 and m != 0 and math.isfinite(m)]
    if len(pts) < 2:
        raise InsufficientLevels(f"need 2 nonzero corrections to fit decay, got {len(pts)}")
    x = np.array([l * math.log(s) for l, _ in pts])
    y = np.log([m for _, m in pts])
    slope, intercept = np.polyfit(x, y, 1)
    return math.exp(intercept), max(-float(slope), alpha_min)


@dataclass(frozen=True)
class ErrorEstimate:
    total: float
    bias: float | None
    statistical: float


def error_estimate(state: EstimatorState, c_alpha: tuple[float, float] | None = None) -> ErrorEstimate:
    """Root of (bias proxy)^2 + sum V_l/n_l.

    The bias proxy |mean Y_L| / (s^alpha - 1) needs a decay fit; when one is
    impossible (fewer than two nonzero corrections) only the statistical
    part is reported and ``bias`` is None.
    """
    cfg = state.config
    stat = math.fsum(sample_variance(st) / st.count for st in state.active)
    if c_alpha is None:
        try:
            c_alpha = fit_decay([st.mean for st in state.active], cfg.s, cfg.alpha_min)
        except InsufficientLevels:
            return ErrorEstimate(math.sqrt(stat), None, stat)
    _, alpha = c_alpha
    bias = abs(state.active[-1].mean) / (cfg.s**alpha - 1.0)
    return ErrorEstimate(math.sqrt(bias * bias + stat), bias, stat)


@dataclass(frozen=True)
class AdaptiveUpdate:
    new_L: int
    new_N: list[int]
    converged: bool
    error: ErrorEstimate
    decay_c: float
    decay_alpha: float
    required_L: int


def adaptive_update(state: EstimatorState) -> AdaptiveUpdate:
    cfg = state.config
    L = state.current_L
    s = cfg.s
    active = state.active
    for st in active:
        if st.count < 2:
            raise InsufficientSamples(f"level {st.level} has {st.count} samples, need 2")

    c, alpha = fit_decay([st.mean for st in active], s, cfg.alpha_min)
    req = required_levels(c, alpha, s, cfg.tolerance)
    # never shrink the hierarchy: sampled levels stay in the estimate
    new_L = max(L, min(req, cfg.M))

    variances = [sample_variance(st) for st in active]
    costs = [st.mean_cost for st in active]
    for _ in range(L + 1, new_L + 1):
        variances.append(variances[-1] / s ** (2 * alpha))
        costs.append(costs[-1] * s**cfg.work_exponent)

    n_opt = optimal_sample_sizes(variances, costs, cfg.tolerance)
    new_N = [max(2, math.ceil(cfg.safety_factor * n)) for n in n_opt]

    err = error_estimate(state, (c, alpha))
    counts = state.counts()
    converged = (
        new_L <= L
        and all(new_N[l] <= counts[l] for l in range(L + 1))
        and err.total <= cfg.tolerance
    )
    return AdaptiveUpdate(new_L, new_N, converged, err, c, alpha, req)


def with_decay(state: EstimatorState, c: float, alpha: float) -> EstimatorState:
    return replace(state, decay_c=c, decay_alpha=alpha)
