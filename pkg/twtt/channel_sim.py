"""
Channel between two nodes.

Moves a transmitted buffer from the transmitter's clock domain into the
receiver's: time-of-flight delay, skew resampling, carrier frequency offset,
carrier phase and additive white Gaussian noise.
"""
from dataclasses import dataclass, replace
from fractions import Fraction
import math
from typing import Optional

import numpy as np


from twtt.clock_model import ClockParams, Seconds, local_from_global
from twtt.exceptions import InvalidParameterError, ResamplerRangeError
from twtt.waveform import IqBuffer
from logger.logger import Logger
logger = Logger(logger_name=__name__)


SPEED_OF_LIGHT: float = 299792458.0

# Windowed-sinc interpolator: 32 taps, Kaiser beta = 8 (> 80 dB image rejection).
KAISER_BETA: float = 8.0
HALF_TAPS: int = 16
_TAP_OFFSETS = np.arange(-HALF_TAPS + 1, HALF_TAPS + 1)

# Fractional positions closer than this to an integer are treated as integer shifts.
INTEGER_SNAP: float = 1e-9

DEFAULT_MAX_RATE_DEVIATION: float = 1e-3


@dataclass(frozen=True)
class LinkParams:
    """
    Propagation and RF impairments of one direction of the link.

    snr_db is the per-sample complex SNR; None (or +inf) means noiseless.
    """
    distance_m: float = 0.0
    carrier_fc: float = 2.4e9
    cfo_ferr: float = 0.0
    phase_err: float = 0.0
    snr_db: Optional[float] = None
    c0: float = SPEED_OF_LIGHT

    def __post_init__(self) -> None:
        if not math.isfinite(self.distance_m) or self.distance_m < 0:
            raise InvalidParameterError(f"distance_m must be finite and >= 0, got {self.distance_m}")
        if not self.c0 > 0:
            raise InvalidParameterError(f"c0 must be positive, got {self.c0}")
        if self.snr_db is not None and (math.isnan(self.snr_db) or self.snr_db == -math.inf):
            raise InvalidParameterError(f"snr_db must be finite or None, got {self.snr_db}")

    @property
    def tof(self) -> float:
        """T_ToF = d / c0 in seconds of global time."""
        return self.distance_m / self.c0

    @property
    def noiseless(self) -> bool:
        return self.snr_db is None or self.snr_db == math.inf

    def reverse(self) -> "LinkParams":
        """The opposite direction: same distance, frequency and phase errors negated."""
        return replace(self, cfo_ferr=-self.cfo_ferr, phase_err=-self.phase_err)


def _kaiser(u: np.ndarray) -> np.ndarray:
    """Continuous Kaiser window over |u| <= HALF_TAPS."""
    ratio = np.clip(u / HALF_TAPS, -1.0, 1.0)
    return np.i0(KAISER_BETA * np.sqrt(1.0 - ratio ** 2)) / np.i0(KAISER_BETA)


def _interpolate(x: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """
    Band-limited value of x at real-valued sample positions, x being zero outside [0, len(x)).
    The kernel is evaluated at the exact fractional phase of every output sample.
    """
    positions = np.asarray(positions, dtype=np.float64)
    base = np.floor(positions)
    frac = positions - base

    # Snap near-integer positions.
    snap_up = frac > 1.0 - INTEGER_SNAP
    base = np.where(snap_up, base + 1, base)
    frac = np.where(snap_up | (frac < INTEGER_SNAP), 0.0, frac)
    base = base.astype(np.int64)

    n = len(x)
    out = np.zeros(len(positions), dtype=np.complex128)

    is_integer = frac == 0.0
    if np.any(is_integer):
        idx = base[is_integer]
        inside = (idx >= 0) & (idx < n)
        values = np.zeros(len(idx), dtype=np.complex128)
        values[inside] = x[idx[inside]]
        out[is_integer] = values

    fractional = ~is_integer
    if np.any(fractional):
        idx = base[fractional, None] + _TAP_OFFSETS[None, :]
        u = frac[fractional, None] - _TAP_OFFSETS[None, :]
        taps = np.sinc(u) * _kaiser(u)
        inside = (idx >= 0) & (idx < n)
        gathered = np.where(inside, x[np.clip(idx, 0, max(n - 1, 0))], 0)
        out[fractional] = np.sum(taps * gathered, axis=1)

    return out


def fractional_delay(buf: IqBuffer, delay_samples: float) -> IqBuffer:
    """
    Delay by a real number of samples, keeping the length: out[n] = x(n - delay).
    Integer delays are exact shifts.
    """
    if abs(delay_samples) >= len(buf):
        raise InvalidParameterError(f"|delay| must be below the buffer length {len(buf)}, got {delay_samples}")
    positions = np.arange(len(buf)) - delay_samples
    return buf.with_samples(_interpolate(buf.samples, positions))


def add_awgn(buf: IqBuffer,
             snr_db: Optional[float],
             seed: int,
             signal_power: Optional[float] = None,
             ) -> IqBuffer:
    """
    Add circular complex Gaussian noise with variance signal_power / 10^(snr_db/10) per sample.

    signal_power defaults to the mean power of the buffer. snr_db None or +inf is noiseless.
    """
    if len(buf) == 0:
        raise InvalidParameterError("cannot add noise to an empty buffer")
    if snr_db is None or snr_db == math.inf:
        return buf

    power = float(np.mean(np.abs(buf.samples) ** 2)) if signal_power is None else signal_power
    variance = power / 10 ** (snr_db / 10)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(len(buf)) + 1j * rng.standard_normal(len(buf))
    return buf.with_samples(buf.samples + math.sqrt(variance / 2) * noise)


def carrier_phase(clk_tx: ClockParams, clk_rx: ClockParams, link: LinkParams) -> float:
    """
    Constant carrier phase (radians, wrapped to [0, 2pi)) picked up between the two clock domains:
    -2 pi f_c (alpha_tx / alpha_rx * (phi_rx + alpha_rx * ToF) - phi_tx).
    """
    tof_rx = Fraction(clk_rx.alpha) * Fraction(link.tof)
    ratio = Fraction(clk_tx.alpha) / Fraction(clk_rx.alpha)
    cycles = -Fraction(link.carrier_fc) * (ratio * (Fraction(clk_rx.phi) + tof_rx) - Fraction(clk_tx.phi))
    return 2 * math.pi * float(cycles % 1)


def propagate(tx: IqBuffer,
              tx_start_global: Seconds,
              clk_tx: ClockParams,
              clk_rx: ClockParams,
              link: LinkParams,
              *,
              seed: int = 0,
              rx_grid_start_local: Optional[Seconds] = None,
              n_out: Optional[int] = None,
              max_rate_deviation: float = DEFAULT_MAX_RATE_DEVIATION,
              ) -> tuple[IqBuffer, Seconds]:
    """
    Received signal on the receiver's sample grid.

    Output sample k sits at receiver-local time rx_grid_start_local + k / f_s and holds
    s(alpha_tx / alpha_rx * (tau - tau_rx_arrival)) * exp(j 2 pi f_err tau) * carrier phase
    * exp(j gamma_err), plus noise.

    Args:
        tx: Transmitted samples; sample 0 leaves the antenna at tx_start_global.
        tx_start_global: Global time of the first transmitted sample.
        rx_grid_start_local: Receiver-local time of output sample 0. Defaults to the
            receiver's reading at tx_start_global, so a zero-length link is a passthrough.
        n_out: Number of output samples. Defaults to the span that covers the delayed signal.

    Returns:
        The received buffer (start_time = rx_grid_start_local) and the global time at which
        the first transmitted sample arrives, tx_start_global + ToF.

    Raises:
        ResamplerRangeError: If |alpha_tx / alpha_rx - 1| exceeds max_rate_deviation.
    """
    if len(tx) == 0:
        raise InvalidParameterError("cannot propagate an empty buffer")

    ratio = clk_tx.alpha / clk_rx.alpha
    if abs(ratio - 1.0) > max_rate_deviation:
        logger.error(f"Relative clock rate {ratio!r} is outside the resampler design range")
        raise ResamplerRangeError(f"|alpha_tx/alpha_rx - 1| = {abs(ratio - 1.0):g} exceeds {max_rate_deviation:g}")

    fs = tx.sample_rate
    t_start = Fraction(tx_start_global)
    arrival_global = t_start + Fraction(link.tof)
    arrival_local = local_from_global(clk_rx, arrival_global)
    grid_start = local_from_global(clk_rx, t_start) if rx_grid_start_local is None else Fraction(rx_grid_start_local)

    # Grid start relative to the arrival, in receiver samples.
    lead = float((grid_start - arrival_local) * Fraction(fs))
    if n_out is None:
        n_out = max(1, math.ceil(len(tx) / ratio - lead))

    k = np.arange(n_out, dtype=np.float64)
    positions = ratio * (lead + k)
    samples = _interpolate(tx.samples, positions)

    if link.cfo_ferr != 0.0:
        # Wrap the grid start first so large absolute times do not eat phase precision.
        start_cycles = float((Fraction(link.cfo_ferr) * grid_start) % 1)
        samples = samples * np.exp(1j * 2 * np.pi * (start_cycles + link.cfo_ferr * k / fs))

    samples = samples * np.exp(1j * (carrier_phase(clk_tx, clk_rx, link) + link.phase_err))

    received = IqBuffer(samples=samples, sample_rate=fs, start_time=float(grid_start))

    if not link.noiseless:
        nonzero = np.abs(tx.samples) > 0
        signal_power = float(np.mean(np.abs(tx.samples[nonzero]) ** 2)) if np.any(nonzero) else 1.0
        received = add_awgn(received, link.snr_db, seed, signal_power=signal_power)

    rx_first_sample_global = arrival_global if isinstance(tx_start_global, Fraction) else float(arrival_global)
    return received, rx_first_sample_global
