"""Parallel multilevel Monte Carlo with a hierarchical dynamic scheduler."""

from .estimator import (
    EstimatorConfig,
    EstimatorState,
    LevelStats,
    adaptive_update,
    fit_decay,
    optimal_sample_sizes,
    required_levels,
    sample_variance,
    telescoping_estimate,
)
from .partition import PartitionFamily, PartitionSpec, build_family, divisibility_class, group_of, is_root
from .scheduler import TaskInstance, greedy_schedule, verify_no_idle_before_exhaustion, work_bounds

__version__ = "0.1.0"

__all__ = [
    "EstimatorConfig", "EstimatorState", "LevelStats", "adaptive_update", "fit_decay",
    "optimal_sample_sizes", "required_levels", "sample_variance", "telescoping_estimate",
    "PartitionFamily", "PartitionSpec", "build_family", "divisibility_class", "group_of", "is_root",
    "TaskInstance", "greedy_schedule", "verify_no_idle_before_exhaustion", "work_bounds",
]
