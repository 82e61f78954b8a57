"""Exceptions raised by the numerical modules."""

from __future__ import annotations

from typing import List, Tuple


class LabError(RuntimeError):
    """Base class for all errors raised by the laboratory."""


class DomainError(LabError, ValueError):
    """Raised for non-finite input or arguments outside their admissible range."""


class UnsupportedError(LabError):
    """Raised when a request is well-formed but not supported by the method."""


class TruncationError(LabError):
    """Raised when a ball, cutoff support or image point leaves the truncated grid."""


class BlowupOverflow(LabError):
    """Signals non-finite values after a physical time step."""


class InstabilityError(LabError):
    """Raised when a rescaled step produces non-finite values."""


class FitWindowError(LabError):
    """Raised when a trajectory cannot support the requested fit."""


class ResamplingError(LabError):
    """Raised when frames are not uniformly spaced in rescaled time."""


class WindowError(LabError):
    """Raised when a sliding window does not fit inside the trajectory."""


class InfeasibleScheduleError(LabError):
    """Raised when an exponent schedule violates one of its conditions."""

    def __init__(self, condition: str, detail: str = "") -> None:
        self.condition = condition
        message = f"Exponent schedule infeasible: {condition}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class ConfigError(LabError):
    """Raised when an experiment configuration fails validation.

    Carries every violation as ``(path, line, message)`` so the command line
    can print all of them at once.
    """

    def __init__(self, source: str, problems: List[Tuple[str, int, str]]) -> None:
        self.source = source
        self.problems = problems
        lines = [
            f"{source}:{line if line else '?'}: {path}: {message}"
            for path, line, message in problems
        ]
        super().__init__("\n".join(lines))
