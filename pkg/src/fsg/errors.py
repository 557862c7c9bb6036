"""Exception taxonomy shared by the library, the service, and the CLI.

Every error carries a stable ``error_class`` string so the HTTP layer and
the CLI can map failures to machine-readable categories and exit codes
without inspecting messages.
"""

from __future__ import annotations

# CLI exit codes per error class.
EXIT_IO = 2
EXIT_VALIDATION = 3
EXIT_CONVERGENCE = 4
EXIT_PROTOCOL = 5


class ToolkitError(Exception):
    """Base class for all errors raised by this package."""

    error_class = "internal"
    exit_code = 1


class ValidationError(ToolkitError):
    """Invalid argument, malformed input data, or broken invariant."""

    error_class = "validation"
    exit_code = EXIT_VALIDATION


class OutOfRangeError(ValidationError):
    """Query pose falls outside the appearance-map boundary box."""


class NoViewError(ValidationError):
    """Query triangle has no usable (non-boundary) view vertex."""


class ConvergenceError(ToolkitError):
    """Iterative solver failed to reach the requested tolerance."""

    error_class = "convergence"
    exit_code = EXIT_CONVERGENCE

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ProtocolError(ToolkitError):
    """Wire-protocol framing or transport failure talking to a generator peer."""

    error_class = "protocol"
    exit_code = EXIT_PROTOCOL


class PipelineError(ToolkitError):
    """A swap/reenactment stage failed; names the stage and the cause."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause

    @property
    def error_class(self):  # type: ignore[override]
        if isinstance(self.cause, ToolkitError):
            return self.cause.error_class
        return "internal"

    @property
    def exit_code(self):  # type: ignore[override]
        if isinstance(self.cause, ToolkitError):
            return self.cause.exit_code
        return 1
