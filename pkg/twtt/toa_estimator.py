"""
Time-of-arrival estimation of the chirp in a received buffer.

Matched-filter correlation, a thresholded argmax and a sinc nonlinear
least-squares fit around the coarse peak for the sub-sample part.
"""
from dataclasses import dataclass
import math
from typing import Optional

import numpy as np
from scipy import fft as sp_fft
from scipy.optimize import least_squares


from twtt.clock_model import Seconds
from twtt.exceptions import (
    DegeneratePeakError,
    InvalidParameterError,
    NoDetectionError,
    PeakInterpolationError,
)
from twtt.waveform import ChirpParams, IqBuffer, generate_chirp
from logger.logger import Logger
logger = Logger(logger_name=__name__)


DEFAULT_THRESHOLD_RATIO: float = 0.5
DEFAULT_WINDOW_HALFWIDTH: int = 3

NLS_GTOL: float = 1e-10
NLS_FTOL: float = 1e-12
NLS_XTOL: float = 1e-12
NLS_MAX_NFEV: int = 100
MAX_SUBSAMPLE_OFFSET: float = 0.5
# Samples whose fitted |W * (k - delta)| is this close to a nonzero integer are left out of the refit.
NULL_MARGIN: float = 0.1
MIN_REFIT_SAMPLES: int = 4


@dataclass(frozen=True, eq=False)
class CorrelationResult:
    """
    Full cross-correlation c[lag] = sum_n received[n + lag] * conj(reference[n]).

    `reference_energy` is the theoretical peak for a unit-gain channel.
    """
    lags: np.ndarray
    magnitude: np.ndarray
    complex_values: np.ndarray
    reference_energy: float

    def __post_init__(self) -> None:
        if not (len(self.lags) == len(self.magnitude) == len(self.complex_values)):
            raise InvalidParameterError("lags, magnitude and complex_values must have equal lengths")

    def index_of(self, lag: int) -> int:
        return int(lag - self.lags[0])


@dataclass(frozen=True)
class ToaEstimate:
    lag_samples: float
    toa_local_seconds: float
    peak_magnitude: float
    snr_estimate_db: float


def _next_power_of_two(n: int) -> int:
    return 1 << max(n - 1, 0).bit_length()


def correlate(reference: IqBuffer, received: IqBuffer) -> CorrelationResult:
    """Matched filter via zero-padded FFT. Lags run from -(len(reference) - 1) to len(received) - 1."""
    if len(reference) == 0 or len(received) == 0:
        raise InvalidParameterError("cannot correlate an empty buffer")
    if len(reference) > len(received):
        raise InvalidParameterError(
            f"reference ({len(reference)} samples) is longer than the received buffer ({len(received)})"
        )

    n_ref, n_rx = len(reference), len(received)
    nfft = _next_power_of_two(n_rx + n_ref - 1)
    spectrum = sp_fft.fft(received.samples, nfft) * np.conj(sp_fft.fft(reference.samples, nfft))
    circular = sp_fft.ifft(spectrum)

    # Negative lags wrap to the end of the circular result.
    values = np.concatenate([circular[nfft - (n_ref - 1):], circular[:n_rx]]) if n_ref > 1 else circular[:n_rx]
    lags = np.arange(-(n_ref - 1), n_rx)
    energy = float(np.sum(np.abs(reference.samples) ** 2))
    return CorrelationResult(lags=lags, magnitude=np.abs(values), complex_values=values, reference_energy=energy)


def detect_peak(corr: CorrelationResult, threshold_ratio: float = DEFAULT_THRESHOLD_RATIO) -> int:
    """
    Lag of the largest correlation magnitude; ties go to the smallest lag.

    Raises:
        NoDetectionError: The peak is below threshold_ratio * reference energy.
    """
    if not (0 < threshold_ratio <= 1):
        raise InvalidParameterError(f"threshold_ratio must be in (0, 1], got {threshold_ratio}")
    best = int(np.argmax(corr.magnitude))
    peak = float(corr.magnitude[best])
    threshold = threshold_ratio * corr.reference_energy
    if peak < threshold:
        raise NoDetectionError(f"correlation peak {peak:.4g} is below the detection threshold {threshold:.4g}")
    return int(corr.lags[best])


def _sinc_slope(u: np.ndarray) -> np.ndarray:
    """d/du sinc(u) with sinc(u) = sin(pi u) / (pi u)."""
    out = np.zeros_like(u)
    nonzero = u != 0
    out[nonzero] = (np.cos(np.pi * u[nonzero]) - np.sinc(u[nonzero])) / u[nonzero]
    return out


def _fit_sinc_magnitude(k: np.ndarray, y: np.ndarray, x0: np.ndarray):
    def residuals(params: np.ndarray) -> np.ndarray:
        a, delta, width = params
        return a * np.abs(np.sinc(width * (k - delta))) - y

    def jacobian(params: np.ndarray) -> np.ndarray:
        a, delta, width = params
        u = width * (k - delta)
        s = np.sinc(u)
        slope = np.sign(s) * _sinc_slope(u)
        return np.column_stack([np.abs(s), -a * width * slope, a * (k - delta) * slope])

    return least_squares(
        residuals,
        x0=x0,
        jac=jacobian,
        method="lm",
        gtol=NLS_GTOL,
        ftol=NLS_FTOL,
        xtol=NLS_XTOL,
        max_nfev=NLS_MAX_NFEV,
    )


def _away_from_nulls(k: np.ndarray, delta: float, width: float) -> np.ndarray:
    """Mask of samples not within NULL_MARGIN of a sidelobe null of the fitted sinc."""
    u = np.abs(width * (k - delta))
    distance = np.abs(u - np.round(u))
    return (u < 0.5) | (distance > NULL_MARGIN)


def interpolate_peak_sinc_nls(corr: CorrelationResult,
                              coarse_lag: int,
                              window_halfwidth: int = DEFAULT_WINDOW_HALFWIDTH,
                              bandwidth_hint: Optional[float] = None,
                              ) -> float:
    """
    Refine the coarse lag by fitting a * |sinc(W * (k - delta))| to the correlation magnitude
    over [coarse - K, coarse + K] with Levenberg-Marquardt.

    |sinc| has a kink at every null, so a sample sitting next to one pulls delta off target.
    Such samples are dropped after the first fit and the fit is repeated on the rest,
    as long as at least MIN_REFIT_SAMPLES remain.

    Args:
        bandwidth_hint: B_c / f_s, the starting value of W. Defaults to 0.5.

    Returns:
        coarse_lag + delta with |delta| <= 0.5.

    Raises:
        PeakInterpolationError: The window leaves the correlation support or the fit did not converge.
        DegeneratePeakError: The window is flat.
    """
    if window_halfwidth < 1:
        raise InvalidParameterError(f"window_halfwidth must be >= 1, got {window_halfwidth}")
    centre = corr.index_of(coarse_lag)
    if centre - window_halfwidth < 0 or centre + window_halfwidth >= len(corr.magnitude):
        raise PeakInterpolationError(
            f"window of +/-{window_halfwidth} around lag {coarse_lag} leaves the correlation support",
            best_lag=float(coarse_lag),
        )

    y = corr.magnitude[centre - window_halfwidth:centre + window_halfwidth + 1]
    k = np.arange(-window_halfwidth, window_halfwidth + 1, dtype=np.float64)
    peak = float(np.max(y))
    if peak == 0 or np.ptp(y) <= 1e-12 * peak:
        raise DegeneratePeakError(f"correlation magnitude is flat around lag {coarse_lag}")

    x0 = np.array([float(y[window_halfwidth]), 0.0, bandwidth_hint if bandwidth_hint else 0.5])
    result = _fit_sinc_magnitude(k, y, x0)

    if result.success and np.all(np.isfinite(result.x)):
        keep = _away_from_nulls(k, float(result.x[1]), float(result.x[2]))
        if not keep.all() and keep.sum() >= MIN_REFIT_SAMPLES:
            refit = _fit_sinc_magnitude(k[keep], y[keep], result.x)
            if refit.success:
                result = refit
            else:
                logger.debug(f"Refit without null samples around lag {coarse_lag} failed: {refit.message}")

    delta = float(result.x[1])
    if not math.isfinite(delta):
        raise PeakInterpolationError(f"sinc fit diverged around lag {coarse_lag}", best_lag=float(coarse_lag))
    clamped = max(-MAX_SUBSAMPLE_OFFSET, min(MAX_SUBSAMPLE_OFFSET, delta))
    if not result.success:
        raise PeakInterpolationError(
            f"sinc fit around lag {coarse_lag} did not converge: {result.message}",
            best_lag=coarse_lag + clamped,
        )
    if clamped != delta:
        logger.warning(f"Sub-sample offset {delta:.4f} clamped to {clamped} around lag {coarse_lag}")
    return coarse_lag + clamped


def _snr_estimate_db(samples: np.ndarray, chirp_start: int, peak_magnitude: float, length_lc: int) -> float:
    """Per-sample SNR from the peak amplitude and the power of the samples before the chirp."""
    noise = samples[:max(chirp_start, 0)]
    if len(noise) == 0:
        return math.nan
    noise_power = float(np.mean(np.abs(noise) ** 2))
    signal_power = (peak_magnitude / length_lc) ** 2
    if noise_power == 0:
        return math.inf
    return 10 * math.log10(signal_power / noise_power)


def estimate_toa(received: IqBuffer,
                 buffer_start_local: Seconds,
                 chirp: ChirpParams,
                 threshold_ratio: float = DEFAULT_THRESHOLD_RATIO,
                 window_halfwidth: int = DEFAULT_WINDOW_HALFWIDTH,
                 ) -> ToaEstimate:
    """
    ToA of the chirp in the receiver's clock: buffer_start_local + lag / f_s.

    Raises:
        NoDetectionError: No chirp in the buffer.
    """
    reference = generate_chirp(chirp)
    corr = correlate(reference, received)
    coarse = detect_peak(corr, threshold_ratio)
    lag = interpolate_peak_sinc_nls(corr, coarse, window_halfwidth,
                                    bandwidth_hint=chirp.bandwidth_bc / chirp.sample_rate_fs)

    peak = float(corr.magnitude[corr.index_of(coarse)])
    toa = float(buffer_start_local) + lag / chirp.sample_rate_fs
    snr_db = _snr_estimate_db(received.samples, coarse - window_halfwidth, peak, chirp.length_lc)
    return ToaEstimate(lag_samples=lag, toa_local_seconds=toa, peak_magnitude=peak, snr_estimate_db=snr_db)
