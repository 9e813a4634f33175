"""Tests for the chirp, the DQPSK timestamp frame and the assembled TWTT waveform."""
import numpy as np
import pytest

from twtt.exceptions import FrameLengthError, InvalidParameterError
from twtt.waveform import (
    FRAME_BITS,
    FRAME_SYMBOLS,
    ChirpParams,
    IqBuffer,
    SymbolConfig,
    TimestampFrame,
    analytic_chirp,
    assemble_twtt_waveform,
    decode_frame,
    encode_frame,
    generate_chirp,
)


SAMPLE_RATE = 61.44e6


def random_frame(rng: np.random.Generator) -> TimestampFrame:
    return TimestampFrame(
        status_bits=int(rng.integers(0, 256)),
        tx_timestamp=int.from_bytes(rng.bytes(8), "big"),
        rx_timestamp=int.from_bytes(rng.bytes(16), "big"),
    )


class TestChirp:

    def test_length_and_unit_magnitude(self, chirp_params: ChirpParams) -> None:
        chirp = generate_chirp(chirp_params)
        assert len(chirp) == 512
        np.testing.assert_allclose(np.abs(chirp.samples), 1.0, atol=1e-12)
        assert chirp.samples[0] == pytest.approx(1.0 + 0j)

    def test_frequency_sweeps_from_minus_to_plus_half_bandwidth(self, chirp_params: ChirpParams) -> None:
        chirp = generate_chirp(chirp_params)
        b, l_c = chirp_params.bandwidth_bc, chirp_params.length_lc
        # Phase difference of samples n and n + 1 is the frequency at n + 0.5.
        inst_freq = np.angle(chirp.samples[1:] * np.conj(chirp.samples[:-1])) * SAMPLE_RATE / (2 * np.pi)
        np.testing.assert_allclose(inst_freq, b * ((np.arange(l_c - 1) + 0.5) / l_c) - b / 2, atol=1.0)
        assert abs(inst_freq[l_c // 2]) < b / l_c
        assert np.all(np.diff(inst_freq) > 0)

    def test_analytic_chirp_is_zero_outside_its_duration(self, chirp_params: ChirpParams) -> None:
        t = np.array([-1e-9, chirp_params.duration_tc, 2 * chirp_params.duration_tc])
        np.testing.assert_array_equal(analytic_chirp(chirp_params, t), 0)

    def test_sampled_chirp_matches_analytic(self, chirp_params: ChirpParams) -> None:
        t = np.arange(chirp_params.length_lc) / SAMPLE_RATE
        np.testing.assert_array_equal(generate_chirp(chirp_params).samples, analytic_chirp(chirp_params, t))

    @pytest.mark.parametrize("bandwidth, length", [(0.0, 512), (SAMPLE_RATE, 512), (36e6, 1), (36e6, 100.5)])
    def test_rejects_invalid_parameters(self, bandwidth: float, length: float) -> None:
        with pytest.raises(InvalidParameterError):
            ChirpParams(bandwidth_bc=bandwidth, sample_rate_fs=SAMPLE_RATE, length_lc=length)


class TestIqBuffer:

    def test_rejects_two_dimensional_samples(self) -> None:
        with pytest.raises(InvalidParameterError):
            IqBuffer(samples=np.zeros((2, 2)), sample_rate=SAMPLE_RATE)

    def test_rejects_non_finite_samples(self) -> None:
        with pytest.raises(InvalidParameterError):
            IqBuffer(samples=np.array([1.0, np.nan]), sample_rate=SAMPLE_RATE)

    def test_dat_file_layout(self, tmp_path) -> None:
        buf = IqBuffer(samples=np.array([1 + 2j, -0.5 + 0.25j]), sample_rate=2.0, start_time=3.0)
        path = tmp_path / "wave.dat"
        buf.to_dat(path, time_origin=3.0)
        lines = path.read_bytes().split(b"\n")
        assert lines[0] == b"t real imag"
        assert lines[1] == b"0 1 2"
        assert lines[2] == b"0.5 -0.5 0.25"
        assert b"\r" not in path.read_bytes()

        loaded = IqBuffer.from_dat(path)
        assert loaded.sample_rate == 2.0
        np.testing.assert_array_equal(loaded.samples, buf.samples)

    def test_binary_file_is_interleaved_float32(self, tmp_path) -> None:
        buf = IqBuffer(samples=np.array([1 + 2j, 3 - 4j]), sample_rate=SAMPLE_RATE)
        path = tmp_path / "wave.bin"
        buf.to_binary(path)
        np.testing.assert_array_equal(np.fromfile(path, dtype="<f4"), [1, 2, 3, -4])
        np.testing.assert_array_equal(IqBuffer.from_binary(path, SAMPLE_RATE).samples, buf.samples)


class TestTimestampFrame:

    def test_bit_layout_is_msb_first_status_tx_rx(self) -> None:
        bits = TimestampFrame(status_bits=0x80, tx_timestamp=1, rx_timestamp=1 << 127).to_bits()
        assert len(bits) == FRAME_BITS
        assert bits[0] == 1 and bits[1:8].sum() == 0
        assert bits[8 + 63] == 1 and bits[8:8 + 63].sum() == 0
        assert bits[72] == 1 and bits[73:].sum() == 0

    @pytest.mark.parametrize("field, value", [("status_bits", 256), ("tx_timestamp", 1 << 64),
                                              ("rx_timestamp", -1)])
    def test_rejects_values_wider_than_their_field(self, field: str, value: int) -> None:
        with pytest.raises(InvalidParameterError):
            TimestampFrame(**{field: value})

    def test_from_bits_checks_length(self) -> None:
        with pytest.raises(FrameLengthError):
            TimestampFrame.from_bits(np.zeros(FRAME_BITS - 1, dtype=np.uint8))


class TestDqpsk:
    sym_cfg = SymbolConfig(samples_per_symbol=8, sample_rate=SAMPLE_RATE)

    def test_frame_occupies_reference_plus_hundred_symbols(self) -> None:
        buf = encode_frame(TimestampFrame(), self.sym_cfg)
        assert len(buf) == FRAME_SYMBOLS * 8 == 808

    def test_all_zero_bits_keep_the_reference_phase(self) -> None:
        buf = encode_frame(TimestampFrame(), self.sym_cfg)
        np.testing.assert_array_equal(buf.samples, 1 + 0j)

    def test_gray_mapped_increments(self) -> None:
        # Leading dibits of the status byte 0b01_11_10_00 -> +pi/2, +pi, +3pi/2, 0.
        buf = encode_frame(TimestampFrame(status_bits=0b01111000), self.sym_cfg)
        symbols = buf.samples[::8][:5]
        np.testing.assert_allclose(symbols, [1, 1j, -1j, -1, -1], atol=1e-12)

    def test_random_frames_survive_constant_phase_rotation(self, rng: np.random.Generator) -> None:
        for _ in range(1000):
            frame = random_frame(rng)
            buf = encode_frame(frame, self.sym_cfg)
            rotated = buf.with_samples(buf.samples * np.exp(1j * rng.uniform(0, 2 * np.pi)))
            assert decode_frame(rotated, self.sym_cfg) == frame

    def test_decodes_at_twenty_db(self, rng: np.random.Generator) -> None:
        for _ in range(50):
            frame = random_frame(rng)
            buf = encode_frame(frame, self.sym_cfg)
            noise = (rng.standard_normal(len(buf)) + 1j * rng.standard_normal(len(buf))) * np.sqrt(0.01 / 2)
            assert decode_frame(buf.with_samples(buf.samples + noise), self.sym_cfg) == frame

    def test_short_buffer_is_rejected(self) -> None:
        buf = encode_frame(TimestampFrame(), self.sym_cfg)
        with pytest.raises(FrameLengthError):
            decode_frame(buf.with_samples(buf.samples[:-1]), self.sym_cfg)


class TestAssembledWaveform:

    def test_layout_is_chirp_gap_frame(self, chirp_params: ChirpParams) -> None:
        chirp = generate_chirp(chirp_params)
        payload = encode_frame(TimestampFrame(status_bits=0xA5), SymbolConfig(sample_rate=SAMPLE_RATE))
        burst = assemble_twtt_waveform(chirp, payload, gap_samples=64)
        assert len(burst) == 512 + 64 + 808
        np.testing.assert_array_equal(burst.samples[:512], chirp.samples)
        np.testing.assert_array_equal(burst.samples[512:576], 0)
        np.testing.assert_array_equal(burst.samples[576:], payload.samples)

    def test_sample_rate_mismatch_is_rejected(self, chirp_params: ChirpParams) -> None:
        payload = encode_frame(TimestampFrame(), SymbolConfig(sample_rate=30.72e6))
        with pytest.raises(InvalidParameterError):
            assemble_twtt_waveform(generate_chirp(chirp_params), payload)
