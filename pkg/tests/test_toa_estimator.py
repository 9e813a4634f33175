"""Tests for the matched filter, peak detection and the sinc least-squares refinement."""
import math

import numpy as np
import pytest

from twtt.channel_sim import add_awgn, fractional_delay
from twtt.crlb import CrlbConfig, toa_crlb_std
from twtt.exceptions import DegeneratePeakError, InvalidParameterError, NoDetectionError, PeakInterpolationError
from twtt.toa_estimator import (
    CorrelationResult,
    correlate,
    detect_peak,
    estimate_toa,
    interpolate_peak_sinc_nls,
)
from twtt.waveform import ChirpParams, IqBuffer, generate_chirp


SAMPLE_RATE = 61.44e6
PAD = 100


def delayed_chirp(p: ChirpParams, delay: float) -> IqBuffer:
    """Chirp sitting at sample PAD + delay inside a zero-padded buffer."""
    chirp = generate_chirp(p).samples
    buf = IqBuffer(samples=np.concatenate([np.zeros(PAD), chirp, np.zeros(PAD)]), sample_rate=SAMPLE_RATE)
    return fractional_delay(buf, delay)


def refined_lag(p: ChirpParams, received: IqBuffer) -> float:
    corr = correlate(generate_chirp(p), received)
    return interpolate_peak_sinc_nls(corr, detect_peak(corr), bandwidth_hint=p.bandwidth_bc / p.sample_rate_fs)


def manual_correlation(magnitude: list[float], energy: float) -> CorrelationResult:
    magnitude = np.asarray(magnitude, dtype=np.float64)
    lags = np.arange(len(magnitude)) - len(magnitude) // 2
    return CorrelationResult(lags=lags, magnitude=magnitude, complex_values=magnitude.astype(np.complex128),
                             reference_energy=energy)


class TestCorrelate:

    def test_autocorrelation_peaks_at_zero_lag_with_the_chirp_energy(self, chirp_params: ChirpParams) -> None:
        chirp = generate_chirp(chirp_params)
        corr = correlate(chirp, chirp)
        assert corr.lags[0] == -511 and corr.lags[-1] == 511
        assert detect_peak(corr) == 0
        assert corr.magnitude[corr.index_of(0)] == pytest.approx(512.0, abs=1e-9)
        assert corr.reference_energy == pytest.approx(512.0)

    def test_integer_delay_moves_the_peak(self, chirp_params: ChirpParams) -> None:
        chirp = generate_chirp(chirp_params)
        received = IqBuffer(samples=np.concatenate([np.zeros(10), chirp.samples, np.zeros(5)]), sample_rate=SAMPLE_RATE)
        assert detect_peak(correlate(chirp, received)) == 10

    def test_fft_matches_direct_correlation(self, chirp_params: ChirpParams, rng: np.random.Generator) -> None:
        chirp = generate_chirp(chirp_params)
        received = IqBuffer(samples=rng.standard_normal(900) + 1j * rng.standard_normal(900), sample_rate=SAMPLE_RATE)
        corr = correlate(chirp, received)
        direct = np.correlate(received.samples, chirp.samples, mode="full")
        np.testing.assert_allclose(corr.complex_values, direct, rtol=0, atol=1e-9 * chirp_params.length_lc)

    def test_reference_longer_than_received_is_rejected(self, chirp_params: ChirpParams) -> None:
        chirp = generate_chirp(chirp_params)
        with pytest.raises(InvalidParameterError):
            correlate(chirp, chirp.with_samples(chirp.samples[:100]))


class TestDetectPeak:

    def test_noise_only_is_not_detected(self, chirp_params: ChirpParams, rng: np.random.Generator) -> None:
        noise = IqBuffer(samples=(rng.standard_normal(2048) + 1j * rng.standard_normal(2048)) / math.sqrt(2),
                         sample_rate=SAMPLE_RATE)
        with pytest.raises(NoDetectionError):
            detect_peak(correlate(generate_chirp(chirp_params), noise))

    def test_ties_go_to_the_smallest_lag(self) -> None:
        assert detect_peak(manual_correlation([1, 5, 5, 2, 1], energy=5.0)) == -1

    @pytest.mark.parametrize("ratio", [0.0, 1.5])
    def test_threshold_ratio_out_of_range(self, ratio: float) -> None:
        with pytest.raises(InvalidParameterError):
            detect_peak(manual_correlation([1, 5, 1], energy=5.0), threshold_ratio=ratio)


class TestSincRefinement:

    def test_on_grid_peak_gives_zero_offset(self, chirp_params: ChirpParams) -> None:
        assert refined_lag(chirp_params, delayed_chirp(chirp_params, 0)) == pytest.approx(PAD, abs=1e-6)

    def test_fractional_delay_is_recovered(self, chirp_params: ChirpParams) -> None:
        assert refined_lag(chirp_params, delayed_chirp(chirp_params, 0.37)) == pytest.approx(PAD + 0.37, abs=2e-3)

    def test_bias_over_a_sample_of_delays(self, chirp_params: ChirpParams) -> None:
        delays = np.linspace(-0.5, 0.5, 101)
        errors = np.array([refined_lag(chirp_params, delayed_chirp(chirp_params, d)) - PAD - d for d in delays])
        assert np.mean(np.abs(errors)) < 1e-3
        assert np.max(np.abs(errors)) < 2e-3

    @pytest.mark.parametrize("delay", [-0.28, -0.27, -0.26, 0.26, 0.27, 0.28])
    def test_delays_that_put_a_window_sample_on_a_sidelobe_null(self, chirp_params: ChirpParams, delay: float) -> None:
        assert refined_lag(chirp_params, delayed_chirp(chirp_params, delay)) == pytest.approx(PAD + delay, abs=2e-3)

    def test_sample_next_to_a_null_is_left_out_of_the_refit(self) -> None:
        width, delta = 0.584, 0.26
        lags = np.arange(-10, 11)
        magnitude = 100 * np.abs(np.sinc(width * (lags - delta)))
        # Lag 2 sits at W * (2 - delta) = 1.016, just past the first null.
        magnitude[lags == 2] += 2.0
        assert interpolate_peak_sinc_nls(manual_correlation(list(magnitude), energy=100.0), 0, bandwidth_hint=width) == pytest.approx(delta, abs=1e-6)

    def test_bias_grows_near_the_sample_rate(self, chirp_params: ChirpParams) -> None:
        wide = ChirpParams(bandwidth_bc=55e6, sample_rate_fs=SAMPLE_RATE, length_lc=512)
        delays = np.linspace(-0.5, 0.5, 21)

        def mean_bias(p: ChirpParams) -> float:
            return float(np.mean([abs(refined_lag(p, delayed_chirp(p, d)) - PAD - d) for d in delays]))

        assert mean_bias(wide) > 3 * mean_bias(chirp_params)

    def test_flat_window_is_degenerate(self) -> None:
        with pytest.raises(DegeneratePeakError):
            interpolate_peak_sinc_nls(manual_correlation([3.0] * 9, energy=3.0), 0)

    def test_window_leaving_the_support(self) -> None:
        corr = manual_correlation([1, 4, 9, 4, 1, 0, 0], energy=9.0)
        with pytest.raises(PeakInterpolationError) as excinfo:
            interpolate_peak_sinc_nls(corr, -2, window_halfwidth=3)
        assert excinfo.value.best_lag == -2.0


class TestEstimateToa:

    def test_toa_is_buffer_start_plus_lag(self, chirp_params: ChirpParams) -> None:
        estimate = estimate_toa(delayed_chirp(chirp_params, 0.25), 1.0, chirp_params)
        assert estimate.lag_samples == pytest.approx(PAD + 0.25, abs=2e-3)
        assert estimate.toa_local_seconds == pytest.approx(1.0 + (PAD + 0.25) / SAMPLE_RATE, abs=2e-3 / SAMPLE_RATE)
        assert estimate.peak_magnitude > 0.9 * chirp_params.length_lc
        assert estimate.snr_estimate_db > 20

    def test_integer_shift_of_the_buffer_shifts_the_estimate(self, chirp_params: ChirpParams) -> None:
        received = delayed_chirp(chirp_params, 0.37)
        shifted = received.with_samples(np.concatenate([np.zeros(7), received.samples]))
        first = estimate_toa(received, 0.0, chirp_params)
        second = estimate_toa(shifted, 0.0, chirp_params)
        assert second.lag_samples - first.lag_samples == pytest.approx(7.0, abs=1e-6)

    def test_snr_estimate_from_leading_noise(self, chirp_params: ChirpParams) -> None:
        received = add_awgn(delayed_chirp(chirp_params, 0.0), 20.0, seed=4, signal_power=1.0)
        assert estimate_toa(received, 0.0, chirp_params).snr_estimate_db == pytest.approx(20.0, abs=1.5)

    def test_snr_is_nan_without_leading_samples(self, chirp_params: ChirpParams) -> None:
        chirp = generate_chirp(chirp_params)
        received = chirp.with_samples(np.concatenate([chirp.samples, np.zeros(50)]))
        assert math.isnan(estimate_toa(received, 0.0, chirp_params).snr_estimate_db)

    @pytest.mark.slow
    def test_spread_at_thirty_db_is_near_the_bound(self, chirp_params: ChirpParams) -> None:
        clean = delayed_chirp(chirp_params, 0.2)
        lags = [estimate_toa(add_awgn(clean, 30.0, seed=s, signal_power=1.0), 0.0, chirp_params).lag_samples
                for s in range(200)]
        spread = np.std(lags, ddof=1) / SAMPLE_RATE
        bound = toa_crlb_std(CrlbConfig(chirp=chirp_params, snr_db=30.0))
        assert 0.7 * bound < spread < 3 * bound
