"""
Affine clock model.

A node's local time is tau = alpha * t + phi, with t the global time,
alpha the skew and phi the offset. All functions accept plain floats or
fractions.Fraction; Fraction in gives an exact Fraction out.
"""
from dataclasses import dataclass
from fractions import Fraction
import math
from typing import Union


from twtt.exceptions import InvalidParameterError


Seconds = Union[float, Fraction]

DEFAULT_MAX_SKEW_DEVIATION: float = 1e-3


@dataclass(frozen=True)
class ClockParams:
    """
    Skew and offset of one node's oscillator.

    Args:
        alpha: Dimensionless skew, close to 1.
        phi: Offset in seconds.
        max_skew_deviation: Plausibility bound on |alpha - 1|. Crystal oscillators
            stay far inside the default of 1e-3; the bound catches configuration typos.
    """
    alpha: float = 1.0
    phi: float = 0.0
    max_skew_deviation: float = DEFAULT_MAX_SKEW_DEVIATION

    def __post_init__(self) -> None:
        if not math.isfinite(self.alpha) or not math.isfinite(self.phi):
            raise InvalidParameterError(f"clock parameters must be finite, got alpha={self.alpha}, phi={self.phi}")
        if self.alpha <= 0:
            raise InvalidParameterError(f"alpha must be positive, got {self.alpha}")
        if abs(self.alpha - 1.0) >= self.max_skew_deviation:
            raise InvalidParameterError(
                f"|alpha - 1| = {abs(self.alpha - 1.0):g} exceeds the plausibility bound {self.max_skew_deviation:g}"
            )


def _check_finite(value: Seconds, name: str) -> None:
    if isinstance(value, float) and not math.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value}")


def local_from_global(clock: ClockParams, t: Seconds) -> Seconds:
    """Local time of `clock` at global time t."""
    _check_finite(t, "t")
    if isinstance(t, Fraction):
        return Fraction(clock.alpha) * t + Fraction(clock.phi)
    return clock.alpha * t + clock.phi


def global_from_local(clock: ClockParams, tau: Seconds) -> Seconds:
    """Global time at which `clock` reads tau."""
    _check_finite(tau, "tau")
    if isinstance(tau, Fraction):
        return (tau - Fraction(clock.phi)) / Fraction(clock.alpha)
    return (tau - clock.phi) / clock.alpha


def true_relative_skew(a: ClockParams, b: ClockParams) -> float:
    """Ground-truth alpha_B / alpha_A."""
    return b.alpha / a.alpha


def relative_to(a: ClockParams, b: ClockParams, tau_a: Seconds) -> Seconds:
    """
    Map a reading of clock `a` to the simultaneous reading of clock `b`.

    Equivalent to local_from_global(b, global_from_local(a, tau_a)): an affine map
    with slope alpha_B / alpha_A.
    """
    return local_from_global(b, global_from_local(a, tau_a))
