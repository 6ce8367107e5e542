"""Exception hierarchy shared by every solver and simulator."""

from __future__ import annotations


class InertDriftError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(InertDriftError, ValueError):
    pass


class NumericalFailure(InertDriftError):
    """A solver could not produce a trustworthy answer."""


class BlowUpError(NumericalFailure):
    """The local time exceeded its cap; ``time`` estimates the blow-up instant."""

    def __init__(self, time: float, level: float, message: str | None = None):
        self.time = float(time)
        self.level = float(level)
        super().__init__(message or f"local time exceeded {level:g} at t={time:.6g}")


class NonConvergenceError(NumericalFailure):
    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class StepFailure(NumericalFailure):
    """Boundary projection did not converge."""


class DomainAssumptionError(NumericalFailure):
    """A visited boundary point violates the graph-domain assumptions."""


class InsufficientData(InvalidArgument):
    """Not enough data for the requested statistic."""
