"""End-to-end tests of one simulated exchange: waveform, controller, channel, ToA, frame and solver together."""
from fractions import Fraction

import pytest

from steps.load_scenario_config import ScenarioConfig, load_scenario_config
from steps.run_exchange import RunExchange, run_exchange
from twtt.exceptions import ExchangeError, FrameIntegrityError
from twtt.waveform import TimestampFrame


FS = 61.44e6
# Worst-case sub-sample bias of the peak fit, in seconds.
BIAS = Fraction(2, 1000) / Fraction(FS)


def noiseless(**overrides) -> ScenarioConfig:
    return load_scenario_config(overrides={"link.snr_db": None, "monte_carlo.n_trials": 1, **overrides})


class TestNoiselessExchange:

    def test_null_channel_on_the_sample_grid(self) -> None:
        cfg = noiseless(**{"link.distance_m": 0.0, "clock_b.alpha": 1.0, "clock_b.phi": 0.0})
        solution = run_exchange(cfg, trial_seed=1).solutions[0]
        assert abs(solution.tof) < Fraction(1, 1000) / Fraction(FS)
        assert abs(solution.offset) < Fraction(1, 1000) / Fraction(FS)
        assert solution.skew_ratio == pytest.approx(1.0, abs=1e-12)

    def test_null_channel_recovers_the_configured_offset(self) -> None:
        cfg = noiseless(**{"link.distance_m": 0.0, "clock_b.alpha": 1.0, "clock_b.phi": 5e-6})
        solution = run_exchange(cfg, trial_seed=1).solutions[0]
        assert abs(solution.tof) < BIAS
        assert abs(solution.offset - Fraction(5e-6)) < BIAS

    def test_bench_distance(self, noiseless_scenario: ScenarioConfig) -> None:
        record = run_exchange(noiseless_scenario, trial_seed=3)
        assert record.tof * noiseless_scenario.link.c0 == pytest.approx(1.8, abs=0.05)
        assert record.solutions[0].distance_m(noiseless_scenario.link.c0) == pytest.approx(1.8, abs=0.05)

    def test_timestamps_match_the_clock_model(self, noiseless_scenario: ScenarioConfig) -> None:
        record = run_exchange(noiseless_scenario, trial_seed=3)
        assert len(record.measurements) == len(record.truth) == 2
        for measured, truth in zip(record.measurements, record.truth):
            assert measured.tau_a_tx == truth.tau_a_tx
            assert measured.tau_b_tx == truth.tau_b_tx
            assert abs(measured.tau_b_rx - truth.tau_b_rx) < BIAS
            assert abs(measured.tau_a_rx - truth.tau_a_rx) < BIAS

    def test_decoded_timestamps_equal_what_b_recorded(self, noiseless_scenario: ScenarioConfig) -> None:
        record = run_exchange(noiseless_scenario, trial_seed=3)
        for measured, (rx, tx) in zip(record.measurements, record.b_recorded):
            assert (measured.tau_b_rx, measured.tau_b_tx) == (rx, tx)

    def test_skew_estimate(self, noiseless_scenario: ScenarioConfig) -> None:
        record = run_exchange(noiseless_scenario, trial_seed=3)
        assert float(record.solutions[0].skew_ratio) == pytest.approx(1.0000001, abs=1e-8)

    def test_timestamp_trigger(self) -> None:
        cfg = noiseless(**{"trigger.mode": "timestamp"})
        assert run_exchange(cfg, trial_seed=3).tof * cfg.link.c0 == pytest.approx(1.8, abs=0.05)

    def test_timestamp_trigger_follows_the_offset_prior(self) -> None:
        cfg = noiseless(**{"trigger.mode": "timestamp", "clock_b.phi": 2e-6, "exchange.expected_offset_s": 2e-6})
        assert run_exchange(cfg, trial_seed=3).tof * cfg.link.c0 == pytest.approx(1.8, abs=0.05)

    def test_cfo_cancels_over_the_round_trip(self) -> None:
        cfg = noiseless(**{"link.cfo_ferr": 1000.0, "link.phase_err": 0.4})
        assert run_exchange(cfg, trial_seed=3).tof * cfg.link.c0 == pytest.approx(1.8, abs=0.05)

    def test_fixed_capture_length(self) -> None:
        cfg = noiseless(**{"trigger.capture_length": 1600})
        record = run_exchange(cfg, trial_seed=3)
        assert len(record.a_captures[0].samples) == 1600
        assert record.tof * cfg.link.c0 == pytest.approx(1.8, abs=0.05)


class TestNoisyExchange:

    def test_same_seed_same_record(self, fast_scenario: ScenarioConfig) -> None:
        runner = RunExchange(fast_scenario)
        first, second = runner.exchange(42), runner.exchange(42)
        assert first.measurements == second.measurements
        assert first.solutions[0].tof == second.solutions[0].tof

    def test_different_seeds_differ(self, fast_scenario: ScenarioConfig) -> None:
        runner = RunExchange(fast_scenario)
        assert runner.exchange(1).measurements != runner.exchange(2).measurements

    def test_twenty_db_keeps_the_frame_intact(self) -> None:
        cfg = load_scenario_config(overrides={"link.snr_db": 20.0})
        runner = RunExchange(cfg)
        for seed in range(20):
            record = runner.exchange(seed)
            for measured, (rx, tx) in zip(record.measurements, record.b_recorded):
                assert (measured.tau_b_rx, measured.tau_b_tx) == (rx, tx)


@pytest.mark.slow
def test_twenty_db_frame_integrity_over_a_thousand_exchanges() -> None:
    runner = RunExchange(load_scenario_config(overrides={"link.snr_db": 20.0}))
    for seed in range(1000):
        record = runner.exchange(seed)
        for measured, (rx, tx) in zip(record.measurements, record.b_recorded):
            assert (measured.tau_b_rx, measured.tau_b_tx) == (rx, tx)


class TestStageErrors:

    def test_unreachable_rssi_threshold_fails_at_b_trigger(self) -> None:
        with pytest.raises(ExchangeError) as excinfo:
            run_exchange(noiseless(**{"trigger.rssi_threshold": 2.0}), trial_seed=0)
        assert excinfo.value.stage == "b_trigger"
        assert str(excinfo.value).startswith("[b_trigger] NoTriggerError")

    def test_wrong_offset_prior_in_timestamp_mode_fails_at_b_trigger(self) -> None:
        cfg = noiseless(**{"trigger.mode": "timestamp", "exchange.expected_offset_s": 0.0})
        with pytest.raises(ExchangeError) as excinfo:
            run_exchange(cfg, trial_seed=0)
        assert excinfo.value.stage == "b_trigger"

    def test_turnaround_shorter_than_the_capture_fails_at_b_reply(self) -> None:
        with pytest.raises(ExchangeError) as excinfo:
            run_exchange(noiseless(**{"exchange.turnaround_ticks": 2}), trial_seed=0)
        assert excinfo.value.stage == "b_reply"

    def test_status_mismatch_fails_at_frame_decode(self, monkeypatch, noiseless_scenario: ScenarioConfig) -> None:
        monkeypatch.setattr("steps.run_exchange.decode_frame", lambda buf, sym_cfg: TimestampFrame(status_bits=0x5A))
        with pytest.raises(ExchangeError) as excinfo:
            run_exchange(noiseless_scenario, trial_seed=0)
        assert excinfo.value.stage == "frame_decode"
        assert isinstance(excinfo.value.__cause__, FrameIntegrityError)
