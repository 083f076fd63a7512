"""
Shared domain types for the fixed-rate ON/OFF link and its two-state sources.

Unit conventions used throughout the package:

* one *block* is one fading realization and one step of every Markov chain;
* all rates (arrivals, service, effective bandwidth/capacity) are in bits per block;
* continuous-time transition rates (FMS/MMPS) are per block;
* SNR is linear everywhere except at the CLI boundary, which accepts dB;
* the QoS exponent theta is a plain positive float in 1/bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

# Below this exponent the analytic theta -> 0 limits are returned instead of
# the closed forms, which lose all precision to cancellation there.
SMALL_THETA = 1e-6


class QosError(Exception):
    """Base class for analytic failures raised by this package."""


class InfeasibleError(QosError):
    """A closed-form inversion has no valid (positive-argument) solution."""


class UnstableError(QosError):
    """Mean arrival rate is not below mean service rate."""


class SolverError(QosError):
    """A root solver did not converge.

    Attributes:
        bracket: last (lo, hi) interval held by the solver.
    """

    def __init__(self, message: str, bracket: Tuple[float, float]):
        super().__init__(f"{message} (last bracket {bracket!r})")
        self.bracket = bracket


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(value: float) -> float:
    if value <= 0:
        raise ValueError(f"cannot express non-positive value {value} in dB")
    return 10.0 * math.log10(value)


def check_theta(theta: float) -> float:
    """Validate a QoS exponent and return it as a float."""
    theta = float(theta)
    if not theta > 0 or math.isinf(theta):
        raise ValueError(f"QoS exponent must be a positive finite number, got {theta}")
    return theta


@dataclass(frozen=True)
class ChannelSpec:
    """Fixed-rate transmission over Rayleigh block fading.

    Args:
        snr: average SNR, linear.
        rate: transmission rate in bits/block. A block is ON (serves ``rate``
            bits) when ``log2(1 + snr * z) > rate``.
    """

    snr: float
    rate: float

    def __post_init__(self):
        if not self.snr > 0 or math.isinf(self.snr):
            raise ValueError(f"snr must be positive and finite, got {self.snr}")
        if not self.rate >= 0 or math.isinf(self.rate):
            raise ValueError(f"rate must be non-negative and finite, got {self.rate}")

    @classmethod
    def from_db(cls, snr_db: float, rate: float) -> "ChannelSpec":
        return cls(db_to_linear(snr_db), rate)

    @property
    def threshold(self) -> float:
        """Fading power level above which the block is ON."""
        return math.expm1(self.rate * math.log(2.0)) / self.snr

    @property
    def on_probability(self) -> float:
        return math.exp(-self.threshold)

    @property
    def mean_service(self) -> float:
        """Ergodic service rate, bits/block."""
        return self.on_probability * self.rate


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


def _check_rate(name: str, value: float, positive: bool) -> None:
    ok = value > 0 if positive else value >= 0
    if not ok or math.isinf(value):
        bound = "positive" if positive else "non-negative"
        raise ValueError(f"{name} must be {bound} and finite, got {value}")


@dataclass(frozen=True)
class DtmsSource:
    """Discrete-time ON/OFF Markov source emitting ``lambda_on`` bits per ON block.

    ``p11`` is the probability of staying OFF, ``p22`` of staying ON.
    """

    p11: float
    p22: float
    lambda_on: float

    def __post_init__(self):
        _check_probability("p11", self.p11)
        _check_probability("p22", self.p22)
        if self.p11 + self.p22 >= 2.0:
            raise ValueError("p11 = p22 = 1 leaves the steady state undefined")
        _check_rate("lambda_on", self.lambda_on, positive=False)

    @classmethod
    def memoryless(cls, p_on: float, lambda_on: float) -> "DtmsSource":
        """Independent-per-block source with ON probability ``p_on``."""
        return cls(1.0 - p_on, p_on, lambda_on)

    @property
    def p_on(self) -> float:
        return min(1.0, (1.0 - self.p11) / (2.0 - self.p11 - self.p22))


@dataclass(frozen=True)
class _CtmcSource:
    alpha: float
    beta: float
    lambda_on: float

    def __post_init__(self):
        _check_rate("alpha", self.alpha, positive=True)
        _check_rate("beta", self.beta, positive=True)
        _check_rate("lambda_on", self.lambda_on, positive=False)

    @classmethod
    def from_p_on(cls, p_on: float, lambda_on: float, total_rate: float = 1.0):
        """Build a source with ``alpha + beta = total_rate`` and the given P_ON."""
        return cls(p_on * total_rate, (1.0 - p_on) * total_rate, lambda_on)

    @property
    def p_on(self) -> float:
        return min(1.0, self.alpha / (self.alpha + self.beta))


@dataclass(frozen=True)
class FmsSource(_CtmcSource):
    """Markov fluid source: constant fluid rate ``lambda_on`` while ON.

    ``alpha`` is the OFF->ON rate and ``beta`` the ON->OFF rate, both per block.
    """


@dataclass(frozen=True)
class MmpsSource(_CtmcSource):
    """Markov-modulated Poisson source; each arrival carries one bit.

    ``lambda_on`` is the Poisson intensity while ON (arrivals per block).
    """


SourceModel = Union[DtmsSource, FmsSource, MmpsSource]


def steady_state(source: SourceModel) -> Tuple[float, float]:
    """Return ``(p_on, lambda_avg)`` for a two-state source."""
    if not isinstance(source, (DtmsSource, FmsSource, MmpsSource)):
        raise TypeError(f"unsupported source type {type(source).__name__}")
    p_on = source.p_on
    return p_on, source.lambda_on * p_on
