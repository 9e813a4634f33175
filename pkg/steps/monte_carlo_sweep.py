"""
Monte Carlo sweep over chirp bandwidth and length.

Every cell runs n_trials full exchanges and reports the sample standard
deviation of the ToF estimate (measurement N, A's clock) next to the CRLB.
All cells reuse the same per-trial seeds, so differences between cells come
from the waveform and not from the noise draw.
"""
from dataclasses import dataclass
import math
from typing import Iterable

import numpy as np
from tqdm import tqdm


from steps.load_scenario_config import ScenarioConfig
from steps.run_exchange import RunExchange
from twtt.crlb import CrlbConfig, tof_crlb_std
from twtt.exceptions import InvalidParameterError, TwttError
from utils.shared.decorators.get_exec_time import get_exec_time
from utils.shared.decorators.try_except import try_except
from logger.logger import Logger
logger = Logger(logger_name=__name__)


@dataclass(frozen=True)
class SweepResult:
    """
    One (bandwidth, length) cell. n counts accepted trials; rejected ones are in n_rejected.
    sigma_tof is 0 for a single accepted trial and NaN when every trial was rejected.
    """
    bandwidth: float
    length: int
    sigma_tof: float
    sigma_tof_cm: float
    mean_tof: float
    crlb_std: float
    n: int
    n_rejected: int = 0
    flagged: bool = False


def trial_seeds(rng_seed: int, n_trials: int) -> list[int]:
    """Per-trial seeds derived from the scenario seed."""
    return [int(s) for s in np.random.SeedSequence(int(rng_seed)).generate_state(n_trials)]


@try_except(exception=[TwttError])
def _run_trial(runner: RunExchange, seed: int) -> float:
    return runner.exchange(seed).tof


class MonteCarloSweep:
    """
    Example:
    >>> results = MonteCarloSweep(cfg, bandwidths=[10e6, 20e6, 36e6], lengths=[512]).sweep()
    >>> [r.sigma_tof_cm for r in results]  # decreasing with bandwidth
    """

    def __init__(self,
                 base: ScenarioConfig,
                 bandwidths: Iterable[float],
                 lengths: Iterable[int],
                 show_progress: bool = True,
                 ) -> None:
        self.base = base
        self.bandwidths: list[float] = [float(b) for b in bandwidths]
        self.lengths: list[int] = [int(n) for n in lengths]
        if not self.bandwidths or not self.lengths:
            raise InvalidParameterError("sweep needs at least one bandwidth and one length")
        self.show_progress = show_progress
        self.seeds = trial_seeds(base.rng_seed, base.n_trials)

    def _crlb(self, cfg: ScenarioConfig) -> float:
        if cfg.link.noiseless:
            return 0.0
        return tof_crlb_std(CrlbConfig(chirp=cfg.chirp, snr_db=cfg.link.snr_db))

    def cell(self, bandwidth: float, length: int) -> SweepResult:
        """Run all trials of one cell."""
        cfg = self.base.with_chirp(bandwidth_bc=bandwidth, length_lc=length)
        runner = RunExchange(cfg)

        tofs: list[float] = []
        desc = f"B_c={bandwidth / 1e6:g} MHz, l_c={length}"
        for seed in tqdm(self.seeds, desc=desc, disable=not self.show_progress, leave=False):
            tof = _run_trial(runner, seed)
            if tof is not None:
                tofs.append(tof)

        n = len(tofs)
        n_rejected = len(self.seeds) - n
        if n >= 2:
            sigma = float(np.std(tofs, ddof=1))
        else:
            sigma = 0.0 if n == 1 else math.nan
        mean = float(np.mean(tofs)) if n else math.nan

        flagged = n_rejected > cfg.max_reject_fraction * len(self.seeds)
        if flagged:
            logger.warning(f"Cell {desc}: {n_rejected}/{len(self.seeds)} trials rejected, "
                           f"above the {cfg.max_reject_fraction:.0%} limit")

        return SweepResult(
            bandwidth=float(bandwidth),
            length=int(length),
            sigma_tof=sigma,
            sigma_tof_cm=sigma * cfg.link.c0 * 100,
            mean_tof=mean,
            crlb_std=self._crlb(cfg),
            n=n,
            n_rejected=n_rejected,
            flagged=flagged,
        )

    @get_exec_time
    def sweep(self) -> list[SweepResult]:
        """Every (length, bandwidth) cell, lengths outermost."""
        results = []
        for length in self.lengths:
            for bandwidth in self.bandwidths:
                result = self.cell(bandwidth, length)
                logger.info(f"B_c={bandwidth / 1e6:g} MHz, l_c={length}: sigma={result.sigma_tof_cm:.4f} cm "
                            f"(CRLB {result.crlb_std * self.base.link.c0 * 100:.4f} cm, n={result.n})")
                results.append(result)
        return results


def monte_carlo_sweep(base: ScenarioConfig,
                      bandwidths: Iterable[float],
                      lengths: Iterable[int],
                      show_progress: bool = False,
                      ) -> list[SweepResult]:
    return MonteCarloSweep(base, bandwidths, lengths, show_progress=show_progress).sweep()
