"""
Load a TWTT scenario from YAML plus command-line overrides.

Scenario files may nest sections (`link: {distance_m: 1.8}`) or use dotted
keys (`link.distance_m: 1.8`); both are flattened to dotted keys, checked
against the known keys and turned into the library's value types.
"""
from dataclasses import dataclass, replace
import math
import os
from typing import Any, Callable, Optional


import yaml


from config.config import DEFAULT_SCENARIO
from twtt.channel_sim import SPEED_OF_LIGHT, LinkParams
from twtt.clock_model import ClockParams
from twtt.exceptions import ConfigError, InvalidParameterError
from twtt.timing_controller_sim import RxTriggerConfig, TriggerMode
from twtt.waveform import ChirpParams, SymbolConfig
from logger.logger import Logger
logger = Logger(logger_name=__name__)


def _to_float(value: Any) -> float:
    if isinstance(value, bool):
        raise ValueError("booleans are not numbers here")
    return float(value)


def _to_optional_float(value: Any) -> Optional[float]:
    if value is None or (isinstance(value, str) and value.strip().lower() in ("none", "null", "")):
        return None
    return _to_float(value)


def _to_int(value: Any) -> int:
    if isinstance(value, bool):
        raise ValueError("booleans are not integers here")
    if isinstance(value, str):
        return int(value.strip(), 0)
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"{value} is not an integer")
        return int(value)
    return int(value)


def _to_mode(value: Any) -> str:
    return TriggerMode(str(value).strip().lower()).value


# Dotted key -> (converter, default).
SCENARIO_SCHEMA: dict[str, tuple[Callable[[Any], Any], Any]] = {
    "clock_a.alpha": (_to_float, 1.0),
    "clock_a.phi": (_to_float, 0.0),
    "clock_b.alpha": (_to_float, 1.0000001),
    "clock_b.phi": (_to_float, 5e-6),
    "clock.max_skew_deviation": (_to_float, 1e-3),
    "link.distance_m": (_to_float, 1.8),
    "link.carrier_fc": (_to_float, 2.4e9),
    "link.cfo_ferr": (_to_float, 0.0),
    "link.phase_err": (_to_float, 0.0),
    "link.snr_db": (_to_optional_float, 30.0),
    "link.c0": (_to_float, SPEED_OF_LIGHT),
    "chirp.bandwidth_bc": (_to_float, 36e6),
    "chirp.sample_rate_fs": (_to_float, 61.44e6),
    "chirp.length_lc": (_to_int, 512),
    "trigger.mode": (_to_mode, "rssi"),
    "trigger.rssi_threshold": (_to_float, 0.25),
    "trigger.rssi_window": (_to_int, 4),
    "trigger.capture_length": (_to_int, 0),
    "trigger.pretrigger_samples": (_to_int, 16),
    "frame.samples_per_symbol": (_to_int, 8),
    "frame.gap_samples": (_to_int, 64),
    "frame.status_bits": (_to_int, 0xA5),
    "exchange.turnaround_ticks": (_to_int, 16384),
    "exchange.interval_ticks": (_to_int, 131072),
    "exchange.start_ticks": (_to_int, 1048576),
    "exchange.listen_lead_samples": (_to_int, 64),
    "exchange.expected_offset_s": (_to_float, 5e-6),
    "exchange.expected_tof_s": (_to_float, 6e-9),
    "toa.threshold_ratio": (_to_float, 0.5),
    "toa.window_halfwidth": (_to_int, 3),
    "solver.skew_smoothing_window": (_to_int, 1),
    "monte_carlo.n_trials": (_to_int, 1000),
    "monte_carlo.rng_seed": (_to_int, 0),
    "monte_carlo.max_reject_fraction": (_to_float, 0.1),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one TWTT scenario needs. Built by load_scenario_config."""
    clock_a: ClockParams
    clock_b: ClockParams
    link: LinkParams
    chirp: ChirpParams
    trigger: RxTriggerConfig
    symbols: SymbolConfig
    gap_samples: int = 64
    status_bits: int = 0xA5
    turnaround_ticks: int = 16384
    interval_ticks: int = 131072
    start_ticks: int = 1048576
    listen_lead_samples: int = 64
    expected_offset_s: float = 5e-6
    expected_tof_s: float = 6e-9
    auto_capture_length: bool = True
    threshold_ratio: float = 0.5
    window_halfwidth: int = 3
    skew_smoothing_window: int = 1
    n_trials: int = 1000
    rng_seed: int = 0
    max_reject_fraction: float = 0.1

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise InvalidParameterError(f"n_trials must be >= 1, got {self.n_trials}")
        if not (0 <= self.max_reject_fraction <= 1):
            raise InvalidParameterError(f"max_reject_fraction must be in [0, 1], got {self.max_reject_fraction}")
        for name in ("turnaround_ticks", "interval_ticks", "start_ticks"):
            value = getattr(self, name)
            if value <= 0 or value % 2:
                raise InvalidParameterError(f"{name} must be a positive even tick count, got {value}")
        if self.listen_lead_samples < 0:
            raise InvalidParameterError(f"listen_lead_samples must be >= 0, got {self.listen_lead_samples}")
        if self.expected_tof_s < 0:
            raise InvalidParameterError(f"expected_tof_s must be >= 0, got {self.expected_tof_s}")
        if self.chirp.sample_rate_fs != self.symbols.sample_rate:
            raise InvalidParameterError("chirp and frame must share one sample rate")

    def with_chirp(self, bandwidth_bc: Optional[float] = None, length_lc: Optional[int] = None) -> "ScenarioConfig":
        """Copy with a different chirp bandwidth and/or length (one Monte Carlo cell)."""
        chirp = ChirpParams(
            bandwidth_bc=self.chirp.bandwidth_bc if bandwidth_bc is None else float(bandwidth_bc),
            sample_rate_fs=self.chirp.sample_rate_fs,
            length_lc=self.chirp.length_lc if length_lc is None else int(length_lc),
        )
        return replace(self, chirp=chirp)


def flatten_scenario(mapping: dict[str, Any], prefix: str = "") -> dict[str, Any]:
    """{'link': {'distance_m': 1.8}} -> {'link.distance_m': 1.8}. Dotted keys pass through."""
    flat: dict[str, Any] = {}
    for key, value in mapping.items():
        dotted = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(value, dict):
            flat.update(flatten_scenario(value, dotted))
        else:
            flat[dotted] = value
    return flat


def parse_set_overrides(items: Optional[list[str]]) -> dict[str, Any]:
    """['link.snr_db=20', 'trigger.mode=timestamp'] -> dotted-key dict, values parsed as YAML scalars."""
    overrides: dict[str, Any] = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override '{item}' is not of the form key=value")
        try:
            overrides[key.strip()] = yaml.safe_load(raw) if raw.strip() else None
        except yaml.YAMLError as e:
            raise ConfigError(f"override '{item}' has an unparsable value: {e}") from e
    return overrides


def _read_scenario_file(path: str) -> dict[str, Any]:
    if not os.path.isfile(path):
        raise ConfigError(f"scenario file {path} does not exist")
    try:
        with open(path, encoding="utf-8") as f:
            loaded = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"could not read scenario file {path}: {e}") from e

    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise ConfigError(f"scenario file {path} must contain a mapping, got {type(loaded).__name__}")
    # Accept a full program config.yaml as well as a bare scenario.
    if isinstance(loaded.get("SCENARIO"), dict):
        loaded = loaded["SCENARIO"]
    return flatten_scenario(loaded)


def _merge(values: dict[str, Any], updates: dict[str, Any], source: str) -> None:
    unknown = sorted(set(updates) - set(SCENARIO_SCHEMA))
    if unknown:
        raise ConfigError(f"unknown scenario keys in {source}: {', '.join(unknown)}")
    values.update(updates)


def _build(values: dict[str, Any]) -> ScenarioConfig:
    v: dict[str, Any] = {}
    for key, raw in values.items():
        converter, _ = SCENARIO_SCHEMA[key]
        try:
            v[key] = converter(raw)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid value {raw!r} for {key}: {e}") from e
        if isinstance(v[key], float) and not math.isfinite(v[key]):
            raise ConfigError(f"{key} must be finite, got {raw!r}")

    bound = v["clock.max_skew_deviation"]
    try:
        return ScenarioConfig(
            clock_a=ClockParams(alpha=v["clock_a.alpha"], phi=v["clock_a.phi"], max_skew_deviation=bound),
            clock_b=ClockParams(alpha=v["clock_b.alpha"], phi=v["clock_b.phi"], max_skew_deviation=bound),
            link=LinkParams(
                distance_m=v["link.distance_m"],
                carrier_fc=v["link.carrier_fc"],
                cfo_ferr=v["link.cfo_ferr"],
                phase_err=v["link.phase_err"],
                snr_db=v["link.snr_db"],
                c0=v["link.c0"],
            ),
            chirp=ChirpParams(
                bandwidth_bc=v["chirp.bandwidth_bc"],
                sample_rate_fs=v["chirp.sample_rate_fs"],
                length_lc=v["chirp.length_lc"],
            ),
            trigger=RxTriggerConfig(
                mode=v["trigger.mode"],
                rssi_threshold=v["trigger.rssi_threshold"],
                rssi_window=v["trigger.rssi_window"],
                # Placeholder until the exchange derives per-node capture lengths.
                capture_length=v["trigger.capture_length"] or 1,
                pretrigger_samples=v["trigger.pretrigger_samples"],
            ),
            symbols=SymbolConfig(
                samples_per_symbol=v["frame.samples_per_symbol"],
                sample_rate=v["chirp.sample_rate_fs"],
            ),
            gap_samples=v["frame.gap_samples"],
            status_bits=v["frame.status_bits"],
            turnaround_ticks=v["exchange.turnaround_ticks"],
            interval_ticks=v["exchange.interval_ticks"],
            start_ticks=v["exchange.start_ticks"],
            listen_lead_samples=v["exchange.listen_lead_samples"],
            expected_offset_s=v["exchange.expected_offset_s"],
            expected_tof_s=v["exchange.expected_tof_s"],
            auto_capture_length=v["trigger.capture_length"] == 0,
            threshold_ratio=v["toa.threshold_ratio"],
            window_halfwidth=v["toa.window_halfwidth"],
            skew_smoothing_window=v["solver.skew_smoothing_window"],
            n_trials=v["monte_carlo.n_trials"],
            rng_seed=v["monte_carlo.rng_seed"],
            max_reject_fraction=v["monte_carlo.max_reject_fraction"],
        )
    except InvalidParameterError as e:
        raise ConfigError(f"invalid scenario: {e}") from e


def load_scenario_config(path: Optional[str] = None,
                         overrides: Optional[dict[str, Any]] = None,
                         ) -> ScenarioConfig:
    """
    Built-in defaults, then the SCENARIO section of config.yaml, then `path`, then `overrides`.

    Raises:
        ConfigError: Unknown keys, unparsable values or violated invariants.
    """
    values = {key: default for key, (_, default) in SCENARIO_SCHEMA.items()}
    _merge(values, flatten_scenario(DEFAULT_SCENARIO), "config.yaml")
    if path:
        _merge(values, _read_scenario_file(path), path)
        logger.debug(f"Loaded scenario file {path}")
    if overrides:
        _merge(values, dict(overrides), "overrides")

    return _build(values)
