"""
Closed-form two-way time transfer estimator.

From one measurement (A TX, B RX, B TX, A RX, each in the local clock of the
node that took it) the initial clock offset; from two consecutive measurements
the relative skew alpha_B / alpha_A; then the time of flight and the
skew-corrected offset of each measurement.

All arithmetic runs on fractions.Fraction, so the skew quotient's subtraction of
nearly equal timestamps loses nothing.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union


from twtt.clock_model import Seconds
from twtt.exceptions import (
    DegenerateMeasurementError,
    InconsistentMeasurementError,
    InsufficientDataError,
    InvalidParameterError,
    SequenceError,
)
from logger.logger import Logger
logger = Logger(logger_name=__name__)


SPEED_OF_LIGHT: float = 299792458.0

# Skew denominators below this fraction of the A-side timestamp scale count as zero.
DEGENERATE_RELATIVE_DENOMINATOR: Fraction = Fraction(1, 10 ** 12)


@dataclass(frozen=True)
class TwttMeasurement:
    """One exchange. A-side times in A's clock, B-side times in B's clock."""
    tau_a_tx: Seconds
    tau_b_rx: Seconds
    tau_b_tx: Seconds
    tau_a_rx: Seconds
    index_n: int = 0

    def __post_init__(self) -> None:
        for name in ("tau_a_tx", "tau_b_rx", "tau_b_tx", "tau_a_rx"):
            value = getattr(self, name)
            try:
                object.__setattr__(self, name, Fraction(value))
            except (TypeError, ValueError, OverflowError) as e:
                raise InvalidParameterError(f"{name} must be a finite number, got {value!r}") from e
        if self.tau_b_tx < self.tau_b_rx:
            raise InconsistentMeasurementError(
                f"measurement {self.index_n}: B replied ({float(self.tau_b_tx)}) before receiving ({float(self.tau_b_rx)})"
            )
        if self.tau_a_rx <= self.tau_a_tx:
            raise InconsistentMeasurementError(
                f"measurement {self.index_n}: A received ({float(self.tau_a_rx)}) before transmitting ({float(self.tau_a_tx)})"
            )


@dataclass(frozen=True)
class TwttSolution:
    """
    Estimates for one measurement. tof and offset are exact rationals; float() them for display.
    """
    index_n: int
    skew_ratio: Fraction
    tof: Fraction
    offset: Fraction
    initial_offset: Fraction
    diagnostics: dict[str, float] = field(default_factory=dict)

    def distance_m(self, c0: float = SPEED_OF_LIGHT) -> float:
        return float(self.tof) * c0


def initial_offset(m: TwttMeasurement) -> Fraction:
    """((tau_B,RX + tau_B,TX) - (tau_A,RX + tau_A,TX)) / 2, exact when both skews are equal."""
    return ((m.tau_b_rx + m.tau_b_tx) - (m.tau_a_rx + m.tau_a_tx)) / 2


def skew_ratio(m_n: TwttMeasurement, m_n1: TwttMeasurement) -> Fraction:
    """
    alpha_B / alpha_A from two consecutive measurements:
    2 (dT'_{n+1} - dT'_n) / (dtau_A,TX + dtau_A,RX) + 1.

    Raises:
        SequenceError: m_n1 is not the measurement right after m_n.
        DegenerateMeasurementError: Both measurements sit at the same A-side times.
    """
    if m_n1.index_n != m_n.index_n + 1:
        raise SequenceError(f"measurements {m_n.index_n} and {m_n1.index_n} are not consecutive")

    denominator = (m_n1.tau_a_tx - m_n.tau_a_tx) + (m_n1.tau_a_rx - m_n.tau_a_rx)
    scale = max(abs(m_n.tau_a_tx), abs(m_n.tau_a_rx), abs(m_n1.tau_a_tx), abs(m_n1.tau_a_rx), Fraction(1))
    if abs(denominator) <= DEGENERATE_RELATIVE_DENOMINATOR * scale:
        raise DegenerateMeasurementError(
            f"measurements {m_n.index_n} and {m_n1.index_n} have no A-side time difference"
        )
    return 2 * (initial_offset(m_n1) - initial_offset(m_n)) / denominator + 1


def _check_skew(skew: Union[Fraction, float]) -> Fraction:
    skew = Fraction(skew)
    if skew <= 0:
        raise InvalidParameterError(f"skew ratio must be positive, got {float(skew)}")
    return skew


def tof(m: TwttMeasurement, skew: Union[Fraction, float], negative_tolerance: Seconds = 0) -> Fraction:
    """
    (tau_A,RX - tau_A,TX) / 2 - skew * (tau_B,TX - tau_B,RX) / 2, in A's clock.

    Negative results no further below zero than negative_tolerance are clamped to 0.

    Raises:
        InconsistentMeasurementError: The result is below -negative_tolerance.
    """
    skew = _check_skew(skew)
    value = (m.tau_a_rx - m.tau_a_tx) / 2 - skew * (m.tau_b_tx - m.tau_b_rx) / 2
    if value >= 0:
        return value
    if -value <= Fraction(negative_tolerance):
        logger.warning(f"Measurement {m.index_n}: ToF {float(value):.3e} s clamped to 0")
        return Fraction(0)
    raise InconsistentMeasurementError(
        f"measurement {m.index_n}: ToF {float(value):.3e} s is below the tolerance -{float(negative_tolerance):.3e} s"
    )


def offset(m: TwttMeasurement, skew: Union[Fraction, float]) -> Fraction:
    """
    (tau_B,RX + tau_B,TX) / 2 - (tau_A,TX + skew * (tau_A,RX - tau_A,TX) / 2).

    Exact when A's transmission of this measurement happens at global time zero;
    otherwise off by (alpha_B - alpha_A) times that global time.
    """
    skew = _check_skew(skew)
    return (m.tau_b_rx + m.tau_b_tx) / 2 - (m.tau_a_tx + skew * (m.tau_a_rx - m.tau_a_tx) / 2)


def _diagnostics(m: TwttMeasurement, skew: Fraction) -> dict[str, float]:
    turnaround = m.tau_b_tx - m.tau_b_rx
    return {
        "round_trip_a": float(m.tau_a_rx - m.tau_a_tx),
        "turnaround_b": float(turnaround),
        "skew_tof_term": float(skew * turnaround / 2),
        "skew_deviation": float(skew - 1),
    }


def solve_sequence(ms: Sequence[TwttMeasurement],
                   smoothing_window: int = 1,
                   negative_tolerance: Seconds = 0,
                   ) -> list[TwttSolution]:
    """
    Solve every measurement of an ordered sequence.

    Measurement n uses the skew of the pair (n, n+1); the last one reuses the
    last pair's skew. With smoothing_window > 1 each skew is replaced by the
    mean of the up to smoothing_window pair skews ending at it.

    Raises:
        InsufficientDataError: Fewer than two measurements.
    """
    if len(ms) < 2:
        raise InsufficientDataError(f"need at least two measurements, got {len(ms)}")
    if smoothing_window < 1:
        raise InvalidParameterError(f"smoothing_window must be >= 1, got {smoothing_window}")

    pair_skews: list[Fraction] = []
    for m_n, m_n1 in zip(ms, ms[1:]):
        try:
            pair_skews.append(skew_ratio(m_n, m_n1))
        except (SequenceError, DegenerateMeasurementError) as e:
            raise type(e)(f"pair at index {m_n.index_n}: {e}") from e

    if smoothing_window > 1:
        smoothed = []
        for i in range(len(pair_skews)):
            window = pair_skews[max(0, i - smoothing_window + 1):i + 1]
            smoothed.append(sum(window) / len(window))
        pair_skews = smoothed

    solutions = []
    for i, m in enumerate(ms):
        skew = pair_skews[min(i, len(pair_skews) - 1)]
        try:
            tof_value = tof(m, skew, negative_tolerance)
        except InconsistentMeasurementError as e:
            raise InconsistentMeasurementError(f"at index {m.index_n}: {e}") from e
        solutions.append(TwttSolution(
            index_n=m.index_n,
            skew_ratio=skew,
            tof=tof_value,
            offset=offset(m, skew),
            initial_offset=initial_offset(m),
            diagnostics=_diagnostics(m, skew),
        ))

    logger.debug(f"Solved {len(solutions)} measurements, first skew {float(pair_skews[0]):.12f}")
    return solutions
