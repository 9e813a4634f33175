"""
Synchronization waveform: the linear chirp, the DQPSK timestamp frame and the
assembled TWTT baseband burst (chirp, idle gap, frame).
"""
from dataclasses import dataclass, field
import math
import os
from typing import Union

import numpy as np


from twtt.exceptions import FrameLengthError, InvalidParameterError
from logger.logger import Logger
logger = Logger(logger_name=__name__)


STATUS_BITS_WIDTH: int = 8
TX_TIMESTAMP_WIDTH: int = 64
RX_TIMESTAMP_WIDTH: int = 128
FRAME_BITS: int = STATUS_BITS_WIDTH + TX_TIMESTAMP_WIDTH + RX_TIMESTAMP_WIDTH
FRAME_SYMBOLS: int = FRAME_BITS // 2 + 1  # one differential reference symbol

# Gray-mapped quadrant increments, indexed by 2*b0 + b1: 00->0, 01->pi/2, 10->3pi/2, 11->pi.
_INCREMENT_FROM_DIBIT = np.array([0, 1, 3, 2], dtype=np.int64)
_DIBIT_FROM_INCREMENT = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=np.uint8)
_QPSK_POINTS = np.array([1 + 0j, 1j, -1 + 0j, -1j], dtype=np.complex128)


@dataclass(frozen=True)
class ChirpParams:
    """
    Chirp bandwidth B_c (Hz), sample rate f_s (Hz) and length l_c (samples).
    """
    bandwidth_bc: float
    sample_rate_fs: float
    length_lc: int

    def __post_init__(self) -> None:
        if not (0 < self.bandwidth_bc < self.sample_rate_fs):
            raise InvalidParameterError(
                f"need 0 < bandwidth_bc < sample_rate_fs, got B_c={self.bandwidth_bc:g}, f_s={self.sample_rate_fs:g}"
            )
        if int(self.length_lc) != self.length_lc or self.length_lc < 2:
            raise InvalidParameterError(f"length_lc must be an integer >= 2, got {self.length_lc}")

    @property
    def duration_tc(self) -> float:
        """T_c = l_c / f_s."""
        return self.length_lc / self.sample_rate_fs

    @property
    def sweep_rate(self) -> float:
        """B_c / T_c in Hz/s."""
        return self.bandwidth_bc / self.duration_tc


@dataclass(frozen=True, eq=False)
class IqBuffer:
    """
    Complex baseband samples at `sample_rate`.

    `start_time` is the time of sample 0 in the clock domain of whoever owns the buffer.
    """
    samples: np.ndarray
    sample_rate: float
    start_time: float = 0.0

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.ndim != 1:
            raise InvalidParameterError(f"samples must be one-dimensional, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise InvalidParameterError("samples must be finite")
        if not self.sample_rate > 0:
            raise InvalidParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        """Time of each sample, start_time + n / sample_rate."""
        return self.start_time + np.arange(len(self.samples)) / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> "IqBuffer":
        return IqBuffer(samples=samples, sample_rate=self.sample_rate, start_time=self.start_time)

    def to_binary(self, path: Union[str, os.PathLike]) -> None:
        """Write interleaved little-endian float32 I/Q."""
        interleaved = np.empty(2 * len(self.samples), dtype="<f4")
        interleaved[0::2] = self.samples.real
        interleaved[1::2] = self.samples.imag
        interleaved.tofile(path)
        logger.debug(f"Wrote {len(self.samples)} I/Q samples to {path}")

    @classmethod
    def from_binary(cls, path: Union[str, os.PathLike], sample_rate: float, start_time: float = 0.0) -> "IqBuffer":
        interleaved = np.fromfile(path, dtype="<f4")
        if len(interleaved) % 2:
            raise InvalidParameterError(f"{path} holds an odd number of float32 values")
        samples = interleaved[0::2].astype(np.float64) + 1j * interleaved[1::2].astype(np.float64)
        return cls(samples=samples, sample_rate=sample_rate, start_time=start_time)

    def to_dat(self, path: Union[str, os.PathLike], time_origin: float = 0.0) -> None:
        """Write whitespace-separated columns `t real imag`, t relative to time_origin."""
        table = np.column_stack([self.times - time_origin, self.samples.real, self.samples.imag])
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            np.savetxt(f, table, fmt="%.17g", header="t real imag", comments="")
        logger.debug(f"Wrote {len(self.samples)} samples to {path}")

    @classmethod
    def from_dat(cls, path: Union[str, os.PathLike]) -> "IqBuffer":
        table = np.loadtxt(path, skiprows=1, ndmin=2)
        if len(table) < 2:
            raise InvalidParameterError(f"{path} needs at least two rows to infer the sample rate")
        sample_rate = 1.0 / (table[1, 0] - table[0, 0])
        return cls(samples=table[:, 1] + 1j * table[:, 2], sample_rate=sample_rate, start_time=float(table[0, 0]))


@dataclass(frozen=True)
class TimestampFrame:
    """
    DQPSK payload: 8 status bits, 64-bit TX tick count and the 128-bit RX timestamp
    (64 integer ticks + 64-bit binary fraction, stored here as the raw 128-bit integer).
    """
    status_bits: int = 0
    tx_timestamp: int = 0
    rx_timestamp: int = 0

    def __post_init__(self) -> None:
        for name, width in (("status_bits", STATUS_BITS_WIDTH),
                            ("tx_timestamp", TX_TIMESTAMP_WIDTH),
                            ("rx_timestamp", RX_TIMESTAMP_WIDTH)):
            value = getattr(self, name)
            if int(value) != value or not (0 <= value < (1 << width)):
                raise InvalidParameterError(f"{name} must fit in {width} unsigned bits, got {value}")

    def to_bits(self) -> np.ndarray:
        """Fields in order status/tx/rx, most significant bit first."""
        text = (f"{self.status_bits:0{STATUS_BITS_WIDTH}b}"
                f"{self.tx_timestamp:0{TX_TIMESTAMP_WIDTH}b}"
                f"{self.rx_timestamp:0{RX_TIMESTAMP_WIDTH}b}")
        return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")

    @classmethod
    def from_bits(cls, bits: np.ndarray) -> "TimestampFrame":
        if len(bits) != FRAME_BITS:
            raise FrameLengthError(f"a frame has {FRAME_BITS} bits, got {len(bits)}")
        text = "".join("1" if b else "0" for b in bits)
        status_end = STATUS_BITS_WIDTH
        tx_end = status_end + TX_TIMESTAMP_WIDTH
        return cls(
            status_bits=int(text[:status_end], 2),
            tx_timestamp=int(text[status_end:tx_end], 2),
            rx_timestamp=int(text[tx_end:], 2),
        )


@dataclass(frozen=True)
class SymbolConfig:
    """Rectangular-pulse DQPSK settings."""
    samples_per_symbol: int = 8
    sample_rate: float = 61.44e6

    def __post_init__(self) -> None:
        if int(self.samples_per_symbol) != self.samples_per_symbol or self.samples_per_symbol < 1:
            raise InvalidParameterError(f"samples_per_symbol must be a positive integer, got {self.samples_per_symbol}")
        if not self.sample_rate > 0:
            raise InvalidParameterError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def frame_samples(self) -> int:
        return FRAME_SYMBOLS * self.samples_per_symbol


def analytic_chirp(p: ChirpParams, t: np.ndarray) -> np.ndarray:
    """
    Continuous-time chirp s(t), zero outside [0, T_c).

    The instantaneous frequency sweeps -B_c/2 -> +B_c/2 over T_c.
    """
    t = np.asarray(t, dtype=np.float64)
    k = p.bandwidth_bc * p.sample_rate_fs / (2 * p.length_lc)
    phase = 2 * np.pi * (k * t - p.bandwidth_bc / 2) * t
    inside = (t >= 0) & (t < p.duration_tc)
    return np.where(inside, np.exp(1j * phase), 0)


def generate_chirp(p: ChirpParams) -> IqBuffer:
    """l_c samples of the chirp at t = n / f_s."""
    t = np.arange(p.length_lc) / p.sample_rate_fs
    return IqBuffer(samples=analytic_chirp(p, t), sample_rate=p.sample_rate_fs)


def encode_frame(f: TimestampFrame, sym_cfg: SymbolConfig) -> IqBuffer:
    """
    Differentially encode the frame: a reference symbol followed by 100 Gray-mapped
    quadrant increments, each held for samples_per_symbol samples.
    """
    bits = f.to_bits().astype(np.int64)
    dibits = 2 * bits[0::2] + bits[1::2]
    increments = _INCREMENT_FROM_DIBIT[dibits]
    quadrants = np.concatenate([[0], np.cumsum(increments) % 4])
    symbols = _QPSK_POINTS[quadrants]
    return IqBuffer(samples=np.repeat(symbols, sym_cfg.samples_per_symbol), sample_rate=sym_cfg.sample_rate)


def decode_frame(buf: IqBuffer, sym_cfg: SymbolConfig) -> TimestampFrame:
    """
    Integrate-and-dump each symbol, then pick the nearest quadrant of the phase
    difference between consecutive symbols. No error correction.
    """
    sps = sym_cfg.samples_per_symbol
    needed = sym_cfg.frame_samples
    if len(buf) < needed:
        raise FrameLengthError(f"need {needed} samples for a frame, got {len(buf)}")

    symbols = buf.samples[:needed].reshape(FRAME_SYMBOLS, sps).mean(axis=1)
    differences = symbols[1:] * np.conj(symbols[:-1])
    increments = np.rint(np.angle(differences) / (np.pi / 2)).astype(np.int64) % 4
    bits = _DIBIT_FROM_INCREMENT[increments].reshape(-1)
    return TimestampFrame.from_bits(bits)


def assemble_twtt_waveform(chirp: IqBuffer, frame_payload: IqBuffer, gap_samples: int = 64) -> IqBuffer:
    """chirp || zeros(gap_samples) || frame_payload."""
    if chirp.sample_rate != frame_payload.sample_rate:
        raise InvalidParameterError(
            f"sample-rate mismatch: chirp {chirp.sample_rate:g} Hz vs payload {frame_payload.sample_rate:g} Hz"
        )
    if gap_samples < 0:
        raise InvalidParameterError(f"gap_samples must be non-negative, got {gap_samples}")
    samples = np.concatenate([chirp.samples, np.zeros(gap_samples, dtype=np.complex128), frame_payload.samples])
    return IqBuffer(samples=samples, sample_rate=chirp.sample_rate, start_time=chirp.start_time)
