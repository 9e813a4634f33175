import argparse
import os
import sys
from typing import Any, Optional


from steps.emit_results import emit_crlb_tables, emit_results
from steps.load_scenario_config import ScenarioConfig, load_scenario_config, parse_set_overrides
from steps.monte_carlo_sweep import MonteCarloSweep
from steps.run_exchange import RunExchange
from twtt.crlb import SnrConvention, crlb_table
from twtt.exceptions import ConfigError, ExchangeError, InvalidParameterError
from utils.shared.make_output_directory import make_output_directory
from utils.shared.next_step import next_step


from config.config import OUTPUT_FOLDER, WAVEFORM_RX_DAT, WAVEFORM_TX_DAT
from logger.logger import Logger
logger = Logger(logger_name=__name__)


EXIT_OK: int = 0
EXIT_CONFIG_ERROR: int = 1
EXIT_REJECTED: int = 2

# Axes of the bound tables when none are given on the command line.
CRLB_BANDWIDTHS_HZ: list[float] = [b * 1e6 for b in range(5, 56)]
CRLB_LENGTHS: list[int] = [256, 512, 768, 1024, 1280]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twtt",
        description="Simulate wireless two-way time transfer between two SDR nodes.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Scenario YAML file (nested sections or dotted keys).")
    common.add_argument("--bandwidth", type=float, action="append", help="Chirp bandwidth in Hz. Repeat to sweep.")
    common.add_argument("--length", type=int, action="append", help="Chirp length in samples. Repeat to sweep.")
    common.add_argument("--trials", type=int, help="Monte Carlo trials per cell.")
    common.add_argument("--seed", type=int, help="Scenario RNG seed.")
    common.add_argument("--snr-db", type=float, help="Per-sample SNR in dB.")
    common.add_argument("--out", default=OUTPUT_FOLDER, help="Output directory.")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="Override any dotted scenario key, e.g. link.distance_m=3.")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="Run one exchange and print the solution.")
    sub.add_parser("sweep", parents=[common], help="Monte Carlo sweep over bandwidth and length.")
    crlb = sub.add_parser("crlb", parents=[common], help="Write CRLB tables.")
    crlb.add_argument("--snr-convention", choices=[c.value for c in SnrConvention],
                      default=SnrConvention.PER_SAMPLE.value)
    sub.add_parser("waveform", parents=[common], help="Dump the TWTT waveform as sent and as received by A.")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    overrides = parse_set_overrides(args.set)
    if args.trials is not None:
        overrides["monte_carlo.n_trials"] = args.trials
    if args.seed is not None:
        overrides["monte_carlo.rng_seed"] = args.seed
    if args.snr_db is not None:
        overrides["link.snr_db"] = args.snr_db
    if args.bandwidth:
        overrides["chirp.bandwidth_bc"] = args.bandwidth[0]
    if args.length:
        overrides["chirp.length_lc"] = args.length[0]
    return overrides


def _run(cfg: ScenarioConfig) -> int:
    next_step("Step 2. Run one exchange.")
    record = RunExchange(cfg).exchange(cfg.rng_seed)
    for solution in record.solutions:
        print(f"measurement {solution.index_n}: "
              f"tof={float(solution.tof):.6e} s, distance={solution.distance_m(cfg.link.c0):.4f} m, "
              f"skew={float(solution.skew_ratio):.12f}, offset={float(solution.offset):.6e} s, "
              f"initial_offset={float(solution.initial_offset):.6e} s")
    print(f"true tof (A clock) = {float(record.true_tof_a):.6e} s, "
          f"true skew = {cfg.clock_b.alpha / cfg.clock_a.alpha:.12f}, "
          f"true offset = {cfg.clock_b.phi - cfg.clock_a.phi:.6e} s")
    return EXIT_OK


def _sweep(cfg: ScenarioConfig, args: argparse.Namespace) -> int:
    bandwidths = args.bandwidth or [cfg.chirp.bandwidth_bc]
    lengths = args.length or [cfg.chirp.length_lc]

    next_step(f"Step 2. Sweep {len(bandwidths)} bandwidths x {len(lengths)} lengths, {cfg.n_trials} trials each.")
    results = MonteCarloSweep(cfg, bandwidths, lengths).sweep()

    next_step("Step 3. Write the result tables.")
    for path in emit_results(results, args.out):
        logger.info(f"Wrote {path}")

    flagged = [r for r in results if r.flagged]
    if flagged:
        logger.error(f"{len(flagged)} cell(s) exceeded the rejection threshold")
        return EXIT_REJECTED
    return EXIT_OK


def _crlb(cfg: ScenarioConfig, args: argparse.Namespace) -> int:
    bandwidths = args.bandwidth or CRLB_BANDWIDTHS_HZ
    lengths = args.length or CRLB_LENGTHS
    snr_db = cfg.link.snr_db if cfg.link.snr_db is not None else 30.0

    next_step(f"Step 2. Compute the CRLB at {snr_db:g} dB ({args.snr_convention}).")
    rows = crlb_table(bandwidths, lengths, cfg.chirp.sample_rate_fs, snr_db,
                      SnrConvention(args.snr_convention), c0=cfg.link.c0)

    next_step("Step 3. Write the bound tables.")
    for path in emit_crlb_tables(rows, args.out, lengths):
        logger.info(f"Wrote {path}")
    return EXIT_OK


def _waveform(cfg: ScenarioConfig, args: argparse.Namespace) -> int:
    next_step("Step 2. Run one exchange to record the waveforms.")
    record = RunExchange(cfg).exchange(cfg.rng_seed)

    next_step("Step 3. Write the waveform files.")
    out_dir = make_output_directory(args.out)
    tx_path = os.path.join(out_dir, WAVEFORM_TX_DAT)
    rx_path = os.path.join(out_dir, WAVEFORM_RX_DAT)
    record.reply_waveforms[0].to_dat(tx_path)
    capture = record.a_captures[0].samples
    capture.to_dat(rx_path, time_origin=capture.start_time)
    logger.info(f"Wrote {tx_path} and {rx_path}")
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    """
    Command-line entry point.

    Exit codes: 0 success, 1 configuration error, 2 rejected exchange or sweep cell over the rejection limit.
    """
    args = _build_parser().parse_args(argv)

    try:
        next_step("Step 1. Load the scenario.")
        cfg = load_scenario_config(args.config, _overrides(args))
        if args.command == "run":
            return _run(cfg)
        if args.command == "sweep":
            return _sweep(cfg, args)
        if args.command == "crlb":
            return _crlb(cfg, args)
        return _waveform(cfg, args)

    except (ConfigError, InvalidParameterError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG_ERROR
    except ExchangeError as e:
        logger.error(f"Exchange rejected at stage '{e.stage}': {e}")
        return EXIT_REJECTED


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\nProgram stopped.")
