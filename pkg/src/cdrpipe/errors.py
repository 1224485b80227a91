"""Exception types shared across the package."""


class CdrPipeError(Exception):
    """Base class for all package-specific errors."""


class AssemblyError(CdrPipeError):
    """Raised for grids or operator inputs that cannot be assembled."""


class SingularSystemError(CdrPipeError):
    """Raised when a linear-system factorization is singular."""


class BlowUpError(CdrPipeError):
    """Raised when time stepping produces nonfinite values."""


class ZeroReferenceError(CdrPipeError):
    """Raised when a relative error is requested against a zero reference."""


class NotSPDError(CdrPipeError):
    """Raised when an inner-product matrix fails its SPD factorization."""


class PipelineStageError(CdrPipeError):
    """Wraps a failure inside one named pipeline stage.

    The ``stage`` attribute is a short identifier (``"assemble"``,
    ``"fom"``, ...) that the CLI maps to a distinct exit code.
    """

    def __init__(self, stage, message):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage
