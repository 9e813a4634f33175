"""
Behavioral model of the PL timing controller.

A free-running counter at f_rf_clk = 2 * f_s, TX gating against a start
timestamp, and an RX path triggered either by a timestamp or by a sliding
RSSI threshold. Baseband samples advance one per TICKS_PER_SAMPLE ticks;
all timestamps are kept in rf_clk ticks.
"""
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


from twtt.exceptions import (
    InvalidParameterError,
    LateScheduleError,
    NoTriggerError,
    ScheduleAlignmentError,
)
from twtt.waveform import IqBuffer
from logger.logger import Logger
logger = Logger(logger_name=__name__)


TICKS_PER_SAMPLE: int = 2
FRACTION_BITS: int = 64
FRACTION_SCALE: int = 1 << FRACTION_BITS
COUNTER_BITS: int = 64

# Status register bits.
STATUS_TX_DONE: int = 1 << 0
STATUS_RX_TRIGGERED: int = 1 << 1
STATUS_LATE_TX: int = 1 << 2
STATUS_NO_TRIGGER: int = 1 << 3

# rssi_threshold register holds the linear power in Q16.
RSSI_REGISTER_SCALE: int = 1 << 16


@dataclass(frozen=True, order=True)
class Ticks:
    """
    rf_clk cycle count with an optional 64-bit binary fraction of a tick.
    """
    count: int = 0
    fraction: int = 0

    def __post_init__(self) -> None:
        if not (0 <= self.count < (1 << COUNTER_BITS)):
            raise InvalidParameterError(f"tick count must fit in {COUNTER_BITS} unsigned bits, got {self.count}")
        if not (0 <= self.fraction < FRACTION_SCALE):
            raise InvalidParameterError(f"tick fraction must fit in {FRACTION_BITS} bits, got {self.fraction}")

    def __add__(self, other: Union[int, "Ticks"]) -> "Ticks":
        if isinstance(other, Ticks):
            return Ticks.from_fraction(self.as_fraction() + other.as_fraction())
        return Ticks(self.count + int(other), self.fraction)

    def as_fraction(self) -> Fraction:
        """Exact tick value."""
        return Fraction(self.count) + Fraction(self.fraction, FRACTION_SCALE)

    def seconds(self, f_rf_clk: float) -> Fraction:
        """Exact local time in seconds."""
        return self.as_fraction() / Fraction(f_rf_clk)

    @property
    def is_sample_aligned(self) -> bool:
        return self.fraction == 0 and self.count % TICKS_PER_SAMPLE == 0

    def to_fixed128(self) -> int:
        """64.64 fixed-point representation carried in the frame's RX timestamp field."""
        return (self.count << FRACTION_BITS) | self.fraction

    @classmethod
    def from_fixed128(cls, value: int) -> "Ticks":
        return cls(count=value >> FRACTION_BITS, fraction=value & (FRACTION_SCALE - 1))

    @classmethod
    def from_fraction(cls, value: Union[Fraction, float, int]) -> "Ticks":
        """Nearest representable tick value (fraction rounded to 2^-64 of a tick)."""
        value = Fraction(value)
        if value < 0:
            raise InvalidParameterError(f"ticks cannot be negative, got {float(value)}")
        count = value.numerator // value.denominator
        fraction = round((value - count) * FRACTION_SCALE)
        if fraction == FRACTION_SCALE:
            count, fraction = count + 1, 0
        return cls(count=count, fraction=fraction)


def ticks_to_local_seconds(t: Ticks, f_rf_clk: float) -> float:
    """count / f_rf_clk + fraction / 2^64 / f_rf_clk."""
    if not f_rf_clk > 0:
        raise InvalidParameterError(f"f_rf_clk must be positive, got {f_rf_clk}")
    return float(t.seconds(f_rf_clk))


class TriggerMode(str, Enum):
    TIMESTAMP = "timestamp"
    RSSI = "rssi"


@dataclass(frozen=True)
class RxTriggerConfig:
    """
    rx_control settings.

    The RSSI is the mean of |x|^2 over the rssi_window samples ending at the candidate sample.
    pretrigger_samples moves the capture start back from the trigger sample (FIFO delay line);
    ts_start is always the tick of the first captured sample.
    """
    mode: TriggerMode = TriggerMode.RSSI
    rx_start: Optional[Ticks] = None
    rssi_threshold: float = 0.25
    rssi_window: int = 4
    capture_length: int = 1024
    pretrigger_samples: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", TriggerMode(self.mode))
        if self.capture_length <= 0:
            raise InvalidParameterError(f"capture_length must be positive, got {self.capture_length}")
        if self.rssi_window < 1:
            raise InvalidParameterError(f"rssi_window must be >= 1, got {self.rssi_window}")
        if self.pretrigger_samples < 0:
            raise InvalidParameterError(f"pretrigger_samples must be >= 0, got {self.pretrigger_samples}")
        if self.mode is TriggerMode.RSSI and not self.rssi_threshold > 0:
            raise InvalidParameterError(f"rssi_threshold must be positive, got {self.rssi_threshold}")


@dataclass(frozen=True)
class CaptureRecord:
    ts_start: Ticks
    samples: IqBuffer


@dataclass(frozen=True)
class ScheduledTx:
    """Handle returned by schedule_tx."""
    tx_start: Ticks
    waveform: IqBuffer
    sequence: int


class PsInterface:
    """
    Register file seen by the processing system. Modeled as atomic reads and writes;
    the clock-domain crossing is not simulated.
    """
    REGISTERS: tuple[str, ...] = ("tx_start", "rx_start", "rssi_threshold", "ts_start", "status")

    def __init__(self) -> None:
        self._registers: dict[str, int] = {name: 0 for name in self.REGISTERS}

    def write(self, name: str, value: int) -> None:
        if name not in self._registers:
            raise InvalidParameterError(f"unknown register '{name}'")
        self._registers[name] = int(value)

    def read(self, name: str) -> int:
        if name not in self._registers:
            raise InvalidParameterError(f"unknown register '{name}'")
        return self._registers[name]

    def set_status(self, bits: int) -> None:
        self._registers["status"] |= bits

    def clear_status(self, bits: int) -> None:
        self._registers["status"] &= ~bits


def rssi_trace(samples: np.ndarray, window: int) -> np.ndarray:
    """Trailing mean of |x|^2 over `window` samples; the stream is zero before its first sample."""
    power = np.abs(samples) ** 2
    padded = np.concatenate([np.zeros(window - 1), power])
    return sliding_window_view(padded, window).mean(axis=1)


class TimingController:
    """
    One node's timing controller: ts_counter, tx_control, rx_control and ps_interface.

    Single-threaded and deterministic; two nodes only interact through buffers
    handed over by the channel simulator.

    Example:
    >>> ctrl = TimingController(sample_rate_fs=61.44e6, name="A")
    >>> handle = ctrl.schedule_tx(chirp, Ticks(1000))
    >>> stream = ctrl.render_tx(Ticks(0), 2000)
    """

    def __init__(self, sample_rate_fs: float, name: str = "node") -> None:
        if not sample_rate_fs > 0:
            raise InvalidParameterError(f"sample_rate_fs must be positive, got {sample_rate_fs}")
        self.sample_rate_fs: float = sample_rate_fs
        self.f_rf_clk: float = TICKS_PER_SAMPLE * sample_rate_fs
        self.name: str = name
        self.registers: PsInterface = PsInterface()
        self.event_log: list[tuple[str, Ticks]] = []
        self._counter: int = 0
        self._scheduled: list[ScheduledTx] = []

    def counter_now(self) -> Ticks:
        """Current c_value of the ts_counter."""
        return Ticks(self._counter)

    def advance_to(self, ticks: Union[Ticks, int]) -> None:
        """Let the counter run up to `ticks`. The counter never goes backwards."""
        target = ticks.count if isinstance(ticks, Ticks) else int(ticks)
        if target < self._counter:
            raise InvalidParameterError(f"counter of node {self.name} cannot run backwards ({target} < {self._counter})")
        self._counter = target

    def ticks_to_local_seconds(self, t: Ticks) -> float:
        return ticks_to_local_seconds(t, self.f_rf_clk)

    def schedule_tx(self, waveform: IqBuffer, tx_start: Ticks) -> ScheduledTx:
        """
        Hold the TX data path until the counter reaches tx_start, then pass the waveform unmodified.

        Raises:
            ScheduleAlignmentError: tx_start is not on a sample edge.
            LateScheduleError: tx_start is before the current counter value.
        """
        if not tx_start.is_sample_aligned:
            raise ScheduleAlignmentError(
                f"tx_start {tx_start} of node {self.name} is not a multiple of {TICKS_PER_SAMPLE} ticks"
            )
        if tx_start.count < self._counter:
            self.registers.set_status(STATUS_LATE_TX)
            raise LateScheduleError(
                f"node {self.name}: tx_start {tx_start.count} is before the counter value {self._counter}"
            )

        self.registers.write("tx_start", tx_start.count)
        handle = ScheduledTx(tx_start=tx_start, waveform=waveform, sequence=len(self.event_log))
        self._scheduled.append(handle)
        self.event_log.append(("tx_scheduled", tx_start))
        logger.debug(f"Node {self.name} scheduled {len(waveform)} samples at tick {tx_start.count}")
        return handle

    def render_tx(self, start: Ticks, n_samples: int) -> IqBuffer:
        """
        DAC output stream of n_samples starting at tick `start`: zero except where a scheduled
        waveform is released. Runs the counter forward to the end of the rendered span.
        """
        if not start.is_sample_aligned:
            raise ScheduleAlignmentError(f"render start {start} is not sample aligned")
        out = np.zeros(n_samples, dtype=np.complex128)
        end_tick = start.count + TICKS_PER_SAMPLE * n_samples

        for handle in self._scheduled:
            offset = (handle.tx_start.count - start.count) // TICKS_PER_SAMPLE
            first = max(offset, 0)
            last = min(offset + len(handle.waveform), n_samples)
            if first >= last:
                continue
            out[first:last] += handle.waveform.samples[first - offset:last - offset]
            if start.count <= handle.tx_start.count < end_tick:
                self.event_log.append(("tx_emitted", handle.tx_start))
                self.registers.set_status(STATUS_TX_DONE)

        if end_tick > self._counter:
            self._counter = end_tick

        return IqBuffer(samples=out, sample_rate=self.sample_rate_fs,
                        start_time=self.ticks_to_local_seconds(start))

    def run_rx(self, stream: IqBuffer, stream_start: Ticks, cfg: RxTriggerConfig) -> CaptureRecord:
        """
        Watch an RX stream whose sample 0 sits at tick stream_start and capture
        cfg.capture_length samples once the trigger condition is met.

        Raises:
            NoTriggerError: No trigger in the stream, or the capture would run past its end.
        """
        if not stream_start.is_sample_aligned:
            raise ScheduleAlignmentError(f"stream start {stream_start} is not sample aligned")

        if cfg.mode is TriggerMode.TIMESTAMP:
            if cfg.rx_start is None:
                raise InvalidParameterError("timestamp mode needs rx_start")
            self.registers.write("rx_start", cfg.rx_start.count)
            delta = cfg.rx_start.count - stream_start.count
            if delta < 0 or not cfg.rx_start.is_sample_aligned:
                self.registers.set_status(STATUS_NO_TRIGGER)
                raise NoTriggerError(f"node {self.name}: rx_start {cfg.rx_start.count} is not a sample of the stream")
            trigger_index = delta // TICKS_PER_SAMPLE
            if trigger_index >= len(stream):
                self.registers.set_status(STATUS_NO_TRIGGER)
                raise NoTriggerError(f"node {self.name}: rx_start {cfg.rx_start.count} is past the stream end")
        else:
            self.registers.write("rssi_threshold", round(cfg.rssi_threshold * RSSI_REGISTER_SCALE))
            above = np.flatnonzero(rssi_trace(stream.samples, cfg.rssi_window) >= cfg.rssi_threshold)
            if len(above) == 0:
                self.registers.set_status(STATUS_NO_TRIGGER)
                raise NoTriggerError(f"node {self.name}: RSSI never reached {cfg.rssi_threshold:g}")
            trigger_index = int(above[0])

        first = max(trigger_index - cfg.pretrigger_samples, 0)
        last = first + cfg.capture_length
        if last > len(stream):
            self.registers.set_status(STATUS_NO_TRIGGER)
            raise NoTriggerError(
                f"node {self.name}: capture of {cfg.capture_length} samples from index {first} "
                f"runs past the stream end ({len(stream)})"
            )

        ts_start = Ticks(stream_start.count + TICKS_PER_SAMPLE * first)
        captured = IqBuffer(samples=stream.samples[first:last].copy(), sample_rate=stream.sample_rate,
                            start_time=self.ticks_to_local_seconds(ts_start))

        self.registers.write("ts_start", ts_start.count)
        self.registers.clear_status(STATUS_NO_TRIGGER)
        self.registers.set_status(STATUS_RX_TRIGGERED)
        self.event_log.append(("rx_triggered", ts_start))

        end_tick = stream_start.count + TICKS_PER_SAMPLE * last
        if end_tick > self._counter:
            self._counter = end_tick

        return CaptureRecord(ts_start=ts_start, samples=captured)
