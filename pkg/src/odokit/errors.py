"""Exception hierarchy shared across the toolkit.

Everything numeric-facing derives from OdokitError so callers (and the CLI)
can map failures to exit codes without enumerating modules.
"""


class OdokitError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(OdokitError, ValueError):
    """Non-finite or otherwise malformed numeric input."""


class DegenerateInputError(OdokitError, ValueError):
    """Input too far from the operation's admissible set (e.g. not a rotation)."""


class DegenerateHeadingError(OdokitError, ValueError):
    """Heading undefined: body x-axis is (numerically) vertical."""


class EmptyInputError(OdokitError, ValueError):
    """An operation that needs at least one element received none."""


class InsufficientDataError(OdokitError, ValueError):
    """Stream too short for the requested windowing."""


class AlignmentError(OdokitError, ValueError):
    """Estimate and reference streams do not share timestamps / sample grid."""


class ModelContractError(OdokitError, ValueError):
    """Model input violates the trained shape contract."""


class NumericOverflowError(OdokitError, FloatingPointError):
    """A non-finite value appeared mid-computation; message names the tensor."""


class TrainingDivergedError(OdokitError, RuntimeError):
    """Training loss became non-finite. Carries the epoch index."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")


class UnsupportedRateError(OdokitError, ValueError):
    """Sampling rate below what the algorithm supports."""


class AliasingError(OdokitError, ValueError):
    """Consecutive attitudes differ by >= pi; rotation increment is ambiguous."""


class CorruptFileError(OdokitError, ValueError):
    """File exists but cannot be parsed as the expected format."""


class VersionMismatchError(OdokitError, ValueError):
    """File format version is not supported by this build."""


class OutOfRangeError(OdokitError, ValueError):
    """Requested mark/index lies outside the available data."""
