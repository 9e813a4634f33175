from typing import Callable

import numpy as np
import pytest


from steps.load_scenario_config import ScenarioConfig, load_scenario_config
from tests.clock_oracle import analytic_measurement
from twtt.twtt_solver import TwttMeasurement
from twtt.waveform import ChirpParams


SAMPLE_RATE = 61.44e6


@pytest.fixture
def chirp_params() -> ChirpParams:
    return ChirpParams(bandwidth_bc=36e6, sample_rate_fs=SAMPLE_RATE, length_lc=512)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def make_measurement() -> Callable[..., TwttMeasurement]:
    return analytic_measurement


@pytest.fixture
def fast_scenario() -> ScenarioConfig:
    """Default bench scenario with few trials."""
    return load_scenario_config(overrides={"monte_carlo.n_trials": 20, "monte_carlo.rng_seed": 11})


@pytest.fixture
def noiseless_scenario() -> ScenarioConfig:
    return load_scenario_config(overrides={"link.snr_db": None, "monte_carlo.n_trials": 1})
