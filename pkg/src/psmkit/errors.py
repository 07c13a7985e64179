"""Exception hierarchy shared by all psmkit modules."""


class PsmError(Exception):
    """Base class for every error raised by psmkit."""


class ParameterError(PsmError, ValueError):
    """A parameter is outside its documented domain."""


class InsufficientDataError(PsmError, ValueError):
    """The record is too short for the requested computation."""


class EmptyInputError(InsufficientDataError):
    """The input contains no frames or samples at all."""


class DegenerateInputError(PsmError, ValueError):
    """Input is formally valid but degenerate (zero mean, constant, ...)."""


class BoundsError(PsmError, IndexError):
    """A region of interest does not fit inside the sensel grid."""


class FrameParseError(PsmError, ValueError):
    """A frame file could not be parsed.

    Carries the 1-based line number (CSV) or frame index (JSON) where
    parsing failed, when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NoPeakError(PsmError, ValueError):
    """Peak search found no candidate bin with nonzero power."""


class DesignError(PsmError, ValueError):
    """A model design matrix is unusable (rank, grouping, nesting)."""


class ConvergenceError(PsmError, RuntimeError):
    """An iterative fit failed to converge within its budget."""
