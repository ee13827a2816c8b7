"""Exception types shared across the package."""


class SemicouplingError(Exception):
    """Base class for all package errors."""


class SchemaError(SemicouplingError, ValueError):
    """A structured-text file violates its documented schema.

    Carries the offending key and, when recoverable from the raw text,
    the 1-based line number.
    """

    def __init__(self, message, key=None, line=None):
        if key is not None and line is not None:
            message = f"{message} (key {key!r}, line {line})"
        elif key is not None:
            message = f"{message} (key {key!r})"
        super().__init__(message)
        self.key = key
        self.line = line


class AbundanceError(SemicouplingError, ValueError):
    """Target mass is not strictly below the source mass."""


class OutOfDomainError(SemicouplingError, ValueError):
    """A cost was evaluated at a point outside its declared domain."""


class PoleError(SemicouplingError, ValueError):
    """An averaged potential or field was evaluated at or inside a pole."""


class InactivePointError(SemicouplingError, ValueError):
    """A point-wise operation requiring an active point got an inactive one."""


class ConvergenceError(SemicouplingError, RuntimeError):
    """Iterative solver failed to meet its tolerance; carries the last residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StageError(SemicouplingError, RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage, message):
        super().__init__(f"stage {stage!r}: {message}")
        self.stage = stage
