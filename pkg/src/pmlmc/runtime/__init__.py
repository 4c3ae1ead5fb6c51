"""Duty protocol, batching, coordinator tree and end-to-end runs."""

from .audit import AuditReport, audit_batches, audit_descent
from .batching import BatchPolicy, CoordinatorNode, CoordinatorTree, batch_size, build_coordinator_tree, tree_batch_size
from .driver import LevelReport, RunConfig, RunReport, coordinator_tree, run_mlmc
from .messages import DoSample, LogEntry, NextPartition, PartialSums, ReadyAtLevel, Shutdown
from .protocol import IterationPlan, Topology
from .simulate import SimCosts, simulate_iteration

__all__ = [
    "AuditReport", "audit_batches", "audit_descent",
    "BatchPolicy", "CoordinatorNode", "CoordinatorTree", "batch_size", "build_coordinator_tree",
    "tree_batch_size", "LevelReport", "RunConfig", "RunReport", "coordinator_tree", "run_mlmc",
    "DoSample", "LogEntry", "NextPartition", "PartialSums", "ReadyAtLevel", "Shutdown",
    "IterationPlan", "Topology", "SimCosts", "simulate_iteration",
]
