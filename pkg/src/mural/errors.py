"""Exception types raised by the mural package."""

from typing import Iterable, Optional, Sequence


class MuralError(Exception):
    """Base class for all mural errors."""


class ContractViolation(MuralError, ValueError):
    """A documented precondition of an operation was not met."""


class EmptyVersionSpaceError(MuralError):
    """The version space became empty during a run.

    Only reachable when the sample sizes are scaled below the values that
    carry the consistency guarantee. The traces collected so far are kept on
    the exception so the failing run can still be inspected.
    """

    def __init__(self, message: str, traces: Sequence = ()):
        super().__init__(message)
        self.traces = list(traces)


class NotRealizableError(MuralError):
    """A group admits no zero-error hypothesis in the class."""

    def __init__(self, group: int, detail: str = ""):
        message = f"group {group} is not realizable by the hypothesis class"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)
        self.group = group


class ScenarioError(MuralError, ValueError):
    """A scenario generator was asked for something it cannot build."""


class ConfigError(MuralError):
    """An experiment configuration failed to parse or validate."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.message = message
        self.path = path
        self.line = line
        super().__init__(str(self))

    def __str__(self) -> str:
        if self.path is None:
            return self.message
        if self.line is None:
            return f"{self.path}: {self.message}"
        return f"{self.path}:{self.line}: {self.message}"


class ReportMismatchError(MuralError):
    """Report sets handed to a comparison do not pair up."""

    def __init__(self, message: str, offenders: Iterable[str] = ()):
        self.offenders = sorted(offenders)
        if self.offenders:
            message = f"{message}: " + ", ".join(self.offenders)
        super().__init__(message)


class InvariantViolation(MuralError):
    """A run report is structurally inconsistent."""
