"""
Write sweep and CRLB tables.

results.csv        bandwidth_hz,length,sigma_tof_s,sigma_cm,crlb_s,n
ll_<length>_bw.dat value sigma_cm   (value = bandwidth in MHz, one file per chirp length)
crlb.csv           same columns as results.csv, sigma = bound, n = 0
crlb.dat           bw <length> <length> ...   (bound in cm per length)
"""
import math
import os
from typing import Iterable


import pandas as pd


from config.config import CRLB_CSV, CRLB_DAT, RESULTS_CSV
from steps.monte_carlo_sweep import SweepResult
from twtt.exceptions import InvalidParameterError
from utils.shared.make_output_directory import make_output_directory
from utils.shared.save_list_of_dicts_to_csv_via_pandas import save_list_of_dicts_to_csv_via_pandas
from logger.logger import Logger
logger = Logger(logger_name=__name__)


RESULT_COLUMNS: list[str] = ["bandwidth_hz", "length", "sigma_tof_s", "sigma_cm", "crlb_s", "n"]
DAT_COLUMNS: list[str] = ["value", "sigma_cm"]
FORMATS: tuple[str, ...] = ("all", "csv", "dat")


def dat_filename(length: int) -> str:
    return f"ll_{int(length)}_bw.dat"


def _csv_row(r: SweepResult) -> dict:
    return {
        "bandwidth_hz": float(r.bandwidth),
        "length": int(r.length),
        "sigma_tof_s": float(r.sigma_tof),
        "sigma_cm": float(r.sigma_tof_cm),
        "crlb_s": float(r.crlb_std),
        "n": int(r.n),
    }


def emit_results(results: list[SweepResult], path: str, format: str = "all") -> list[str]:
    """
    Write `results` into the directory `path`.

    Args:
        format: "csv" for results.csv only, "dat" for the per-length .dat files only, "all" for both.

    Returns:
        Paths of the written files, CSV first, .dat files in order of first appearance.

    Raises:
        InvalidParameterError: results is empty or format is unknown.
        OSError: A file could not be written; the message names the path.
    """
    if not results:
        raise InvalidParameterError("no sweep results to emit")
    if format not in FORMATS:
        raise InvalidParameterError(f"format must be one of {FORMATS}, got '{format}'")

    out_dir = make_output_directory(path)
    written: list[str] = []

    if format in ("all", "csv"):
        csv_path = os.path.join(out_dir, RESULTS_CSV)
        save_list_of_dicts_to_csv_via_pandas([_csv_row(r) for r in results], csv_path,
                                             columns=RESULT_COLUMNS, logger=logger)
        written.append(csv_path)

    if format in ("all", "dat"):
        by_length: dict[int, list[SweepResult]] = {}
        for r in results:
            by_length.setdefault(int(r.length), []).append(r)
        for length, rows in by_length.items():
            dat_path = os.path.join(out_dir, dat_filename(length))
            save_list_of_dicts_to_csv_via_pandas(
                [{"value": r.bandwidth / 1e6, "sigma_cm": r.sigma_tof_cm} for r in rows],
                dat_path, columns=DAT_COLUMNS, sep=" ", logger=logger,
            )
            written.append(dat_path)

    return written


def read_results(path: str) -> list[SweepResult]:
    """
    Parse a results CSV back into SweepResult. mean_tof is not part of the layout and comes back NaN.
    """
    if os.path.isdir(path):
        path = os.path.join(path, RESULTS_CSV)
    df = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in RESULT_COLUMNS if c not in df.columns]
    if missing:
        raise InvalidParameterError(f"{path} lacks the columns {missing}")

    return [
        SweepResult(
            bandwidth=float(row.bandwidth_hz),
            length=int(row.length),
            sigma_tof=float(row.sigma_tof_s),
            sigma_tof_cm=float(row.sigma_cm),
            mean_tof=math.nan,
            crlb_std=float(row.crlb_s),
            n=int(row.n),
        )
        for row in df.itertuples(index=False)
    ]


def emit_crlb_tables(rows: list[dict], path: str, lengths: Iterable[int]) -> list[str]:
    """
    Write crlb.csv (results layout) and crlb.dat (one column per length) from crlb.crlb_table rows.
    """
    if not rows:
        raise InvalidParameterError("no CRLB rows to emit")
    out_dir = make_output_directory(path)
    lengths = [int(n) for n in lengths]

    csv_rows = [{
        "bandwidth_hz": row["bandwidth_hz"],
        "length": row["length"],
        "sigma_tof_s": row["crlb_s"],
        "sigma_cm": row["crlb_cm"],
        "crlb_s": row["crlb_s"],
        "n": 0,
    } for row in rows]
    csv_path = os.path.join(out_dir, CRLB_CSV)
    save_list_of_dicts_to_csv_via_pandas(csv_rows, csv_path, columns=RESULT_COLUMNS, logger=logger)

    table = pd.DataFrame.from_records(rows).pivot(index="bandwidth_hz", columns="length", values="crlb_cm")
    dat_rows = []
    for bandwidth, values in table.iterrows():
        dat_row = {"bw": bandwidth / 1e6}
        dat_row.update({str(length): float(values[length]) for length in lengths})
        dat_rows.append(dat_row)
    dat_path = os.path.join(out_dir, CRLB_DAT)
    save_list_of_dicts_to_csv_via_pandas(dat_rows, dat_path, columns=["bw"] + [str(n) for n in lengths],
                                         sep=" ", logger=logger)
    return [csv_path, dat_path]
