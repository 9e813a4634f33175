"""
Program-wide settings.

Reads config.yaml from the project root once at import time and exposes
the values as module-level constants, e.g.

>>> from config.config import OUTPUT_FOLDER, DEFAULT_SCENARIO
"""
import copy
import logging
import os
from typing import Any

import yaml


PROJECT_ROOT: str = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
YAML_PATH: str = os.path.join(PROJECT_ROOT, "config.yaml")

OUTPUT_FOLDER: str = os.path.join(PROJECT_ROOT, "output")
DEBUG_FOLDER: str = os.path.join(PROJECT_ROOT, "debug_logs")


_DEFAULTS: dict[str, Any] = {
    "FILENAMES": {
        "RESULTS_CSV": "results.csv",
        "CRLB_CSV": "crlb.csv",
        "CRLB_DAT": "crlb.dat",
        "WAVEFORM_TX_DAT": "waveform_tx.dat",
        "WAVEFORM_RX_DAT": "waveform_rx_a.dat",
    },
    "LOGGER": {
        "DEFAULT_LOG_LEVEL": 20,
        "FORCE_DEFAULT_LOG_LEVEL_FOR_WHOLE_PROGRAM": False,
    },
    "SCENARIO": {},
}


def _load_config(yaml_path: str) -> dict[str, Any]:
    """Load config.yaml, falling back to the built-in defaults section by section."""
    config = copy.deepcopy(_DEFAULTS)
    try:
        with open(yaml_path) as f:
            loaded = yaml.safe_load(f)

        if not isinstance(loaded, dict):
            raise ValueError("YAML file must contain a dictionary")

        for section, values in loaded.items():
            if isinstance(values, dict) and isinstance(config.get(section), dict):
                config[section].update(values)
            else:
                config[section] = values

    except Exception as e:
        # The Logger itself depends on this module, so use the stdlib logger here.
        logging.getLogger(__name__).warning(f"Could not import config yaml file: {e}\nDefaulting to built-in settings...")

    return config


_CONFIG: dict[str, Any] = _load_config(YAML_PATH)

RESULTS_CSV: str = _CONFIG["FILENAMES"]["RESULTS_CSV"]
CRLB_CSV: str = _CONFIG["FILENAMES"]["CRLB_CSV"]
CRLB_DAT: str = _CONFIG["FILENAMES"]["CRLB_DAT"]
WAVEFORM_TX_DAT: str = _CONFIG["FILENAMES"]["WAVEFORM_TX_DAT"]
WAVEFORM_RX_DAT: str = _CONFIG["FILENAMES"]["WAVEFORM_RX_DAT"]

DEFAULT_LOG_LEVEL: int = int(_CONFIG["LOGGER"]["DEFAULT_LOG_LEVEL"])
FORCE_DEFAULT_LOG_LEVEL_FOR_WHOLE_PROGRAM: bool = bool(_CONFIG["LOGGER"]["FORCE_DEFAULT_LOG_LEVEL_FOR_WHOLE_PROGRAM"])

# NOTE Consumers must copy before mutating; steps.load_scenario_config does.
DEFAULT_SCENARIO: dict[str, Any] = _CONFIG.get("SCENARIO") or {}
