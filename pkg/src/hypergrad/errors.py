"""Exception hierarchy shared across the package."""


class HypergradError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(HypergradError, ValueError):
    """Operand shapes do not conform."""


class NonFiniteError(HypergradError, FloatingPointError):
    """A NaN or Inf appeared where a finite value was required.

    ``step`` carries the 1-based training-step index when the failure
    occurred inside an iteration loop, else None.
    """

    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (at step {step})"
        super().__init__(message)
        self.step = step


class TapeReplayError(HypergradError):
    """Replaying a recorded trajectory did not reproduce it bit-exactly."""


class ConfigError(HypergradError, ValueError):
    """Invalid or incomplete experiment configuration."""


class IngestError(HypergradError, ValueError):
    """Malformed input data file."""
