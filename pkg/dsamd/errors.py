"""Exception hierarchy for the dsamd package."""

from pathlib import Path


class DsamdError(Exception):
    """Base class for every error raised by dsamd."""


class DomainViolationError(DsamdError, ValueError):
    """A point lies outside the feasible set."""


class UnboundedDomainError(DsamdError, ValueError):
    """A quantity that needs a compact feasible set was requested on an unbounded one."""


class NumericError(DsamdError, ValueError):
    """Non-finite input reached a numeric routine."""


class ProxConvergenceError(DsamdError, RuntimeError):
    """The inner prox solver hit its iteration cap."""

    def __init__(self, message: str, residual: float) -> None:
        super().__init__(f"{message} (residual={residual:.3e})")
        self.message = message
        self.residual = residual

    def __reduce__(self):
        return (type(self), (self.message, self.residual))


class ParameterError(DsamdError, ValueError):
    """Impossible or inconsistent parameters."""


class RuleMismatchError(ParameterError):
    """A mixing rule was applied to a topology it does not support."""


class GraphGenerationError(DsamdError, RuntimeError):
    """A random graph family did not produce a connected sample."""


class ShapeError(DsamdError, ValueError):
    """Array dimensions do not match."""


class ScheduleError(DsamdError, ValueError):
    """A rate schedule violates its constraints."""


class ConfigError(DsamdError, ValueError):
    """Run inputs are inconsistent with each other."""


class StateError(DsamdError, RuntimeError):
    """An object was used before it was prepared."""


class DataError(DsamdError, ValueError):
    """Input data cannot be used for the requested computation."""


class SweepError(DsamdError, RuntimeError):
    """Wraps a failure inside a sweep with the sweep point and instance."""

    def __init__(self, m: int, instance: int, cause: BaseException) -> None:
        super().__init__(f"sweep failed at m={m}, instance={instance}: {cause}")
        self.m = m
        self.instance = instance
        self.cause = cause

    def __reduce__(self):
        return (type(self), (self.m, self.instance, self.cause))


class EmitError(DsamdError, RuntimeError):
    """Writing or reading an artifact failed."""

    def __init__(self, path: Path, reason: str) -> None:
        super().__init__(f"I/O failure on {path}: {reason}")
        self.path = path
        self.reason = reason

    def __reduce__(self):
        return (type(self), (self.path, self.reason))
