"""
Exception hierarchy for the TWTT simulation.

Everything the library raises on purpose derives from TwttError so callers
(the Monte Carlo harness in particular) can separate expected rejections from bugs.
"""
from typing import Optional


class TwttError(Exception):
    """Base class for all expected simulation failures."""


class InvalidParameterError(TwttError, ValueError):
    """A value type was constructed with parameters that violate its invariants."""


class ConfigError(TwttError):
    """Scenario or program configuration could not be parsed or validated."""


class ResamplerRangeError(InvalidParameterError):
    """The relative clock rate lies outside the fractional-delay resampler's design range."""


class NoDetectionError(TwttError):
    """The correlation peak stayed below the detection threshold."""


class PeakInterpolationError(TwttError):
    """The sinc least-squares fit did not converge. `best_lag` holds the last iterate."""

    def __init__(self, message: str, best_lag: Optional[float] = None) -> None:
        super().__init__(message)
        self.best_lag = best_lag


class DegeneratePeakError(TwttError):
    """The interpolation window is flat, so no peak position can be fitted."""


class NoTriggerError(TwttError):
    """The RX controller saw no trigger condition, or the capture ran past the stream end."""


class LateScheduleError(TwttError):
    """A transmission was scheduled for a tick the counter has already passed."""


class ScheduleAlignmentError(InvalidParameterError):
    """A TX start tick does not fall on a baseband sample edge."""


class FrameLengthError(TwttError):
    """The buffer handed to the DQPSK decoder is too short for a full frame."""


class FrameIntegrityError(TwttError):
    """The decoded frame's status bits do not match what the sender put in them."""


class DegenerateMeasurementError(TwttError):
    """Two measurements share (nearly) the same A-side times, so the skew quotient has no denominator."""


class InconsistentMeasurementError(TwttError):
    """A measurement violates causality or yields a ToF below the noise tolerance."""


class InsufficientDataError(TwttError):
    """Not enough measurements for the requested estimate."""


class SequenceError(TwttError):
    """Measurements are not consecutive."""


class ExchangeError(TwttError):
    """A stage of a simulated TWTT exchange failed. `stage` names it."""

    def __init__(self, stage: str, message: str) -> None:
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
