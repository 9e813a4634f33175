"""
Cramer-Rao lower bound on chirp time-of-arrival estimation.

sigma_tau = 1 / (2 pi beta sqrt(2 Es/N0)) with beta the Gabor RMS bandwidth
of the sampled chirp.
"""
from dataclasses import dataclass
from enum import Enum
import math
from typing import Iterable

import numpy as np
from scipy import fft as sp_fft


from twtt.exceptions import InvalidParameterError
from twtt.waveform import ChirpParams, generate_chirp


SPECTRUM_OVERSAMPLING: int = 16


class SnrConvention(str, Enum):
    # Es/N0 = l_c * SNR: the SNR is per sample and the matched filter integrates l_c samples.
    PER_SAMPLE = "per-sample"
    # Es/N0 = SNR: the SNR already refers to the matched-filter output.
    POST_INTEGRATION = "post-integration"


@dataclass(frozen=True)
class CrlbConfig:
    chirp: ChirpParams
    snr_db: float
    snr_convention: SnrConvention = SnrConvention.PER_SAMPLE

    def __post_init__(self) -> None:
        object.__setattr__(self, "snr_convention", SnrConvention(self.snr_convention))
        if not math.isfinite(self.snr_db):
            raise InvalidParameterError(f"snr_db must be finite, got {self.snr_db}")

    @property
    def es_n0(self) -> float:
        snr = 10 ** (self.snr_db / 10)
        if self.snr_convention is SnrConvention.PER_SAMPLE:
            return self.chirp.length_lc * snr
        return snr


def rms_bandwidth(chirp: ChirpParams) -> float:
    """Gabor bandwidth sqrt(sum f^2 |S(f)|^2 / sum |S(f)|^2) of the sampled chirp, in Hz."""
    samples = generate_chirp(chirp).samples
    nfft = SPECTRUM_OVERSAMPLING * (1 << (len(samples) - 1).bit_length())
    power = np.abs(sp_fft.fft(samples, nfft)) ** 2
    freqs = sp_fft.fftfreq(nfft, d=1 / chirp.sample_rate_fs)
    return float(np.sqrt(np.sum(freqs ** 2 * power) / np.sum(power)))


def toa_crlb_std(cfg: CrlbConfig) -> float:
    """Lower bound on the standard deviation of a single ToA estimate, in seconds."""
    beta = rms_bandwidth(cfg.chirp)
    return 1 / (2 * math.pi * beta * math.sqrt(2 * cfg.es_n0))


def tof_crlb_std(cfg: CrlbConfig) -> float:
    """
    Bound for the two-way ToF: two independent ToA estimates each enter with weight 1/2.
    """
    return toa_crlb_std(cfg) / math.sqrt(2)


def crlb_table(bandwidths: Iterable[float],
               lengths: Iterable[int],
               sample_rate_fs: float,
               snr_db: float,
               snr_convention: SnrConvention = SnrConvention.PER_SAMPLE,
               c0: float = 299792458.0,
               ) -> list[dict]:
    """One row per (bandwidth, length): ToA and ToF bounds in seconds and the ToF bound in cm."""
    rows = []
    for length in lengths:
        for bandwidth in bandwidths:
            cfg = CrlbConfig(chirp=ChirpParams(bandwidth, sample_rate_fs, int(length)),
                             snr_db=snr_db, snr_convention=snr_convention)
            tof_std = tof_crlb_std(cfg)
            rows.append({
                "bandwidth_hz": float(bandwidth),
                "length": int(length),
                "crlb_toa_s": toa_crlb_std(cfg),
                "crlb_s": tof_std,
                "crlb_cm": tof_std * c0 * 100,
            })
    return rows
