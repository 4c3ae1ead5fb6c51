"""Exception hierarchy shared across the package."""

from __future__ import annotations


class PmlmcError(Exception):
    """Base class for all package errors."""


# estimator
class EmptyLevel(PmlmcError):
    pass


class InsufficientSamples(PmlmcError):
    pass


class InsufficientLevels(PmlmcError):
    pass


class DimensionMismatch(PmlmcError):
    pass


class NonpositiveCost(PmlmcError):
    pass


# partition
class InvalidSpec(PmlmcError):
    pass


class OutOfRange(PmlmcError):
    pass


# scheduler
class UnschedulableTask(PmlmcError):
    pass


class InstanceTooLarge(PmlmcError):
    pass


class ApproximationViolation(PmlmcError, AssertionError):
    """Greedy makespan reached twice the optimum."""


# runtime / metrics
class InvalidArgs(PmlmcError, ValueError):
    pass


class ProtocolViolation(PmlmcError):
    pass


class ModelFailure(PmlmcError):
    """A model evaluation raised; carries the partial report when available."""

    def __init__(self, level: int, index: int, cause: BaseException | None = None):
        super().__init__(f"model failed at level {level}, sample {index}: {cause!r}")
        self.level = level
        self.index = index
        self.cause = cause
        self.partial_report = None


class SolveFailure(PmlmcError):
    pass


class ConfigError(PmlmcError):
    pass
