"""
One simulated TWTT exchange between node A and node B.

The harness owns the global timeline. Node logic (timing controllers, ToA
estimation, frame coding, timestamp-mode rx_start) only ever sees local ticks,
sample buffers and configured priors; the global time is used to place the
simulated sample streams and to build the ground truth.
"""
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
import math
from typing import Iterator

import numpy as np


from steps.load_scenario_config import ScenarioConfig
from twtt.channel_sim import LinkParams, propagate
from twtt.clock_model import ClockParams, global_from_local, local_from_global
from twtt.crlb import CrlbConfig, toa_crlb_std
from twtt.exceptions import ExchangeError, FrameIntegrityError, TwttError
from twtt.timing_controller_sim import (
    TICKS_PER_SAMPLE,
    CaptureRecord,
    RxTriggerConfig,
    Ticks,
    TriggerMode,
    TimingController,
)
from twtt.toa_estimator import estimate_toa
from twtt.twtt_solver import TwttMeasurement, TwttSolution, solve_sequence
from twtt.waveform import (
    IqBuffer,
    TimestampFrame,
    assemble_twtt_waveform,
    decode_frame,
    encode_frame,
    generate_chirp,
)
from logger.logger import Logger
logger = Logger(logger_name=__name__)


MEASUREMENTS_PER_EXCHANGE: int = 2
CAPTURE_MARGIN_SAMPLES: int = 32


@dataclass
class ExchangeRecord:
    """
    Result of one exchange: the measurements as node A assembled them, the analytic
    ground truth, what node B recorded locally and the solver output.
    """
    measurements: list[TwttMeasurement] = field(default_factory=list)
    truth: list[TwttMeasurement] = field(default_factory=list)
    b_recorded: list[tuple[Fraction, Fraction]] = field(default_factory=list)
    solutions: list[TwttSolution] = field(default_factory=list)
    a_captures: list[CaptureRecord] = field(default_factory=list)
    reply_waveforms: list[IqBuffer] = field(default_factory=list)
    true_tof_a: Fraction = Fraction(0)

    @property
    def tof(self) -> float:
        """ToF estimate of the first measurement, in A's clock."""
        return float(self.solutions[0].tof)


@contextmanager
def _stage(name: str) -> Iterator[None]:
    """Re-raise library errors of a protocol stage as ExchangeError(stage=name)."""
    try:
        yield
    except ExchangeError:
        raise
    except TwttError as e:
        raise ExchangeError(name, f"{e.__class__.__name__}: {e}") from e


class RunExchange:
    """
    Runs full two-measurement exchanges for one scenario.

    Example:
    >>> record = RunExchange(cfg).exchange(trial_seed=7)
    >>> record.tof * cfg.link.c0
    1.8000...
    """

    def __init__(self, cfg: ScenarioConfig) -> None:
        self.cfg = cfg
        self.fs = cfg.chirp.sample_rate_fs
        self.f_rf = Fraction(TICKS_PER_SAMPLE) * Fraction(self.fs)
        self.chirp = generate_chirp(cfg.chirp)

        lc = cfg.chirp.length_lc
        pre = cfg.trigger.pretrigger_samples
        if cfg.auto_capture_length:
            b_capture = pre + lc + cfg.window_halfwidth + CAPTURE_MARGIN_SAMPLES
            a_capture = pre + lc + cfg.gap_samples + cfg.symbols.frame_samples + CAPTURE_MARGIN_SAMPLES
        else:
            b_capture = a_capture = cfg.trigger.capture_length
        self.trigger_b = self._trigger(b_capture)
        self.trigger_a = self._trigger(a_capture)

        if cfg.link.noiseless:
            toa_std = 0.0
        else:
            toa_std = toa_crlb_std(CrlbConfig(chirp=cfg.chirp, snr_db=cfg.link.snr_db))
        self.negative_tolerance = max(3 * toa_std, 1e-3 / self.fs)

    def _trigger(self, capture_length: int) -> RxTriggerConfig:
        t = self.cfg.trigger
        return RxTriggerConfig(mode=t.mode, rx_start=t.rx_start, rssi_threshold=t.rssi_threshold,
                               rssi_window=t.rssi_window, capture_length=capture_length,
                               pretrigger_samples=t.pretrigger_samples)

    def _ticks_to_seconds(self, ticks: Fraction) -> Fraction:
        return Fraction(ticks) / self.f_rf

    def _seconds_to_ticks(self, seconds: float) -> int:
        return round(Fraction(seconds) * self.f_rf)

    def _listen_start(self, arrival_local: Fraction) -> Ticks:
        """Even tick listen_lead_samples before the true arrival, on the receiver's grid. Harness side only."""
        arrival_sample = math.floor(arrival_local * Fraction(self.fs))
        start_sample = max(arrival_sample - self.cfg.listen_lead_samples, 0)
        return Ticks(TICKS_PER_SAMPLE * start_sample)

    def _timestamp_rx_start(self, expected_arrival: int) -> int:
        """Capture start pretrigger_samples ahead of the expected arrival, rounded down to a sample tick."""
        start = expected_arrival - TICKS_PER_SAMPLE * self.cfg.trigger.pretrigger_samples
        return max(start - start % TICKS_PER_SAMPLE, 0)

    def _expected_arrivals(self, tx_a: Ticks) -> tuple[int, int]:
        """
        Where each node expects the other's burst, in its own ticks, from what the nodes know:
        the protocol schedule, the configured offset prior and the expected ToF.

        B expects A's chirp at tx_a shifted by offset + ToF. In timestamp mode B replies
        turnaround_ticks after its capture start, so A expects the reply that much later,
        minus the offset and plus the ToF again.
        """
        offset = self._seconds_to_ticks(self.cfg.expected_offset_s)
        tof = self._seconds_to_ticks(self.cfg.expected_tof_s)
        at_b = tx_a.count + offset + tof
        at_a = self._timestamp_rx_start(at_b) + self.cfg.turnaround_ticks - offset + tof
        return at_b, at_a

    def _listen_trigger(self, base: RxTriggerConfig, expected_arrival: int) -> RxTriggerConfig:
        if base.mode is TriggerMode.TIMESTAMP:
            return RxTriggerConfig(mode=base.mode, rx_start=Ticks(self._timestamp_rx_start(expected_arrival)),
                                   capture_length=base.capture_length)
        return base

    def _receive(self,
                 ctrl: TimingController,
                 tx: IqBuffer,
                 tx_start_global: Fraction,
                 tx_clock: ClockParams,
                 rx_clock: ClockParams,
                 link: LinkParams,
                 trigger: RxTriggerConfig,
                 expected_arrival: int,
                 seed: int,
                 ) -> CaptureRecord:
        arrival_local = local_from_global(rx_clock, tx_start_global + Fraction(link.tof))
        listen_start = self._listen_start(arrival_local)
        n_out = self.cfg.listen_lead_samples + trigger.capture_length + trigger.rssi_window + CAPTURE_MARGIN_SAMPLES
        stream, _ = propagate(tx, tx_start_global, tx_clock, rx_clock, link, seed=seed,
                              rx_grid_start_local=self._ticks_to_seconds(listen_start.count), n_out=n_out)
        return ctrl.run_rx(stream, listen_start, self._listen_trigger(trigger, expected_arrival))

    def _measure(self,
                 index_n: int,
                 ctrl_a: TimingController,
                 ctrl_b: TimingController,
                 seeds: np.ndarray,
                 record: ExchangeRecord,
                 ) -> TwttMeasurement:
        cfg = self.cfg
        tx_a = Ticks(cfg.start_ticks + index_n * cfg.interval_ticks)
        tau_a_tx = self._ticks_to_seconds(tx_a.count)

        with _stage("a_tx"):
            ctrl_a.schedule_tx(self.chirp, tx_a)
            a_burst = ctrl_a.render_tx(tx_a, len(self.chirp))
        t1 = global_from_local(cfg.clock_a, tau_a_tx)
        expected_at_b, expected_at_a = self._expected_arrivals(tx_a)

        with _stage("b_trigger"):
            capture_b = self._receive(ctrl_b, a_burst, t1, cfg.clock_a, cfg.clock_b, cfg.link, self.trigger_b,
                                      expected_at_b, int(seeds[0]))
        with _stage("b_toa"):
            toa_b = estimate_toa(capture_b.samples, ctrl_b.ticks_to_local_seconds(capture_b.ts_start), cfg.chirp,
                                 cfg.threshold_ratio, cfg.window_halfwidth)
            rx_b = Ticks.from_fraction(capture_b.ts_start.count + TICKS_PER_SAMPLE * Fraction(toa_b.lag_samples))

        tx_b = Ticks(capture_b.ts_start.count + cfg.turnaround_ticks)
        frame = TimestampFrame(status_bits=cfg.status_bits, tx_timestamp=tx_b.count, rx_timestamp=rx_b.to_fixed128())
        with _stage("b_reply"):
            reply = assemble_twtt_waveform(self.chirp, encode_frame(frame, cfg.symbols), cfg.gap_samples)
            ctrl_b.schedule_tx(reply, tx_b)
            b_burst = ctrl_b.render_tx(tx_b, len(reply))
        t3 = global_from_local(cfg.clock_b, self._ticks_to_seconds(tx_b.count))

        with _stage("a_trigger"):
            capture_a = self._receive(ctrl_a, b_burst, t3, cfg.clock_b, cfg.clock_a, cfg.link.reverse(), self.trigger_a,
                                      expected_at_a, int(seeds[1]))
        with _stage("a_toa"):
            toa_a = estimate_toa(capture_a.samples, ctrl_a.ticks_to_local_seconds(capture_a.ts_start), cfg.chirp,
                                 cfg.threshold_ratio, cfg.window_halfwidth)
        tau_a_rx = self._ticks_to_seconds(capture_a.ts_start.count + TICKS_PER_SAMPLE * Fraction(toa_a.lag_samples))

        with _stage("frame_decode"):
            frame_start = round(toa_a.lag_samples) + cfg.chirp.length_lc + cfg.gap_samples
            payload = capture_a.samples.samples[max(frame_start, 0):]
            decoded = decode_frame(IqBuffer(samples=payload, sample_rate=self.fs), cfg.symbols)
            if decoded.status_bits != cfg.status_bits:
                raise FrameIntegrityError(
                    f"status bits {decoded.status_bits:#04x} do not match the expected {cfg.status_bits:#04x}"
                )

        tau_b_rx = self._ticks_to_seconds(Ticks.from_fixed128(decoded.rx_timestamp).as_fraction())
        tau_b_tx = self._ticks_to_seconds(decoded.tx_timestamp)
        with _stage("assemble"):
            measurement = TwttMeasurement(tau_a_tx=tau_a_tx, tau_b_rx=tau_b_rx, tau_b_tx=tau_b_tx,
                                          tau_a_rx=tau_a_rx, index_n=index_n)

        tof = Fraction(cfg.link.tof)
        record.truth.append(TwttMeasurement(
            tau_a_tx=tau_a_tx,
            tau_b_rx=local_from_global(cfg.clock_b, t1 + tof),
            tau_b_tx=self._ticks_to_seconds(tx_b.count),
            tau_a_rx=local_from_global(cfg.clock_a, t3 + tof),
            index_n=index_n,
        ))
        record.b_recorded.append((self._ticks_to_seconds(rx_b.as_fraction()), self._ticks_to_seconds(tx_b.count)))
        record.a_captures.append(capture_a)
        record.reply_waveforms.append(reply)
        return measurement

    def exchange(self, trial_seed: int) -> ExchangeRecord:
        """
        Two consecutive measurements and their solution.

        Raises:
            ExchangeError: A stage failed; `stage` names it and the cause is chained.
        """
        seeds = np.random.SeedSequence(int(trial_seed)).generate_state(2 * MEASUREMENTS_PER_EXCHANGE)
        ctrl_a = TimingController(self.fs, name="A")
        ctrl_b = TimingController(self.fs, name="B")

        record = ExchangeRecord(true_tof_a=Fraction(self.cfg.clock_a.alpha) * Fraction(self.cfg.link.tof))
        for n in range(MEASUREMENTS_PER_EXCHANGE):
            record.measurements.append(self._measure(n, ctrl_a, ctrl_b, seeds[2 * n:2 * n + 2], record))

        with _stage("solve"):
            record.solutions = solve_sequence(record.measurements,
                                              smoothing_window=self.cfg.skew_smoothing_window,
                                              negative_tolerance=self.negative_tolerance)
        return record


def run_exchange(cfg: ScenarioConfig, trial_seed: int) -> ExchangeRecord:
    """Run one full exchange (two successive measurements) for `cfg`."""
    return RunExchange(cfg).exchange(trial_seed)
