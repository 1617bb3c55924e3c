"""Exception hierarchy shared across the toolkit.

Everything raised on bad input data derives from :class:`CanidsError` so the
command line layer can map it to a single "data error" exit code.
"""


class CanidsError(Exception):
    """Base class for all toolkit errors caused by input data or state."""


class MalformedFrame(CanidsError):
    """A CAN frame violates a structural precondition (e.g. empty payload)."""


class LogFormatError(CanidsError):
    """A log file line does not match the canonical grammar."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class ScenarioError(CanidsError):
    """A scenario spec or injection request is inconsistent."""


class GraphBuildError(CanidsError):
    """The window builder hit an impossible input (timestamp regression)."""


class FeatureError(CanidsError):
    """Feature computation was asked for an undefined quantity."""


class ShapeError(CanidsError):
    """Model parameters and batch dimensions do not line up."""


class DivergenceError(CanidsError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"non-finite training loss at epoch {epoch}")


class CheckpointError(CanidsError):
    """A checkpoint file is corrupt or from an unknown version."""


class EvalError(CanidsError):
    """Prediction and truth inputs cannot be compared."""
