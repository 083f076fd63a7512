"""
Matching source effective bandwidth to link effective capacity.

Given an effective capacity ``ec`` at exponent ``theta``, the ``max_on_rate_*``
functions return the largest ON-state rate for which the source's effective
bandwidth still equals ``ec``. ``solve_qos_exponent`` goes the other way:
for a fixed source and link it finds the exponent at which both sides meet,
which sets the decay rate of the delay tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .bandwidth import effective_bandwidth
from .capacity import effective_capacity
from .core import (
    SMALL_THETA,
    ChannelSpec,
    DtmsSource,
    FmsSource,
    InfeasibleError,
    MmpsSource,
    SolverError,
    SourceModel,
    UnstableError,
    check_theta,
    steady_state,
)

THETA_CAP = 1e3
_THETA_START = 1e-6
_MATCH_RTOL = 1e-10


@dataclass(frozen=True)
class DelaySpec:
    """Delay threshold ``d`` in blocks and non-empty-buffer probability ``zeta``."""

    d: float
    zeta: float = 1.0

    def __post_init__(self):
        if not self.d >= 0:
            raise ValueError(f"delay threshold must be non-negative, got {self.d}")
        if not 0.0 < self.zeta <= 1.0:
            raise ValueError(f"zeta must lie in (0, 1], got {self.zeta}")


@dataclass(frozen=True)
class OperatingPoint:
    """Exponent at which source and link effective rates meet.

    ``capped`` is set when the source never reaches the link's effective
    capacity below ``THETA_CAP``; ``theta`` is then the cap itself.
    """

    theta: float
    effective_bandwidth: float
    effective_capacity: float
    capped: bool = False


def _check_ec(ec: float) -> float:
    ec = float(ec)
    if not ec > 0 or math.isinf(ec):
        raise InfeasibleError(f"effective capacity must be positive and finite, got {ec}")
    return ec


def max_on_rate_dtms(p11: float, p22: float, ec: float, theta: float) -> float:
    """Largest DTMS ON rate whose effective bandwidth equals ``ec``.

    Raises:
        InfeasibleError: if the log argument is not positive.
    """
    theta = check_theta(theta)
    ec = _check_ec(ec)
    y = theta * ec
    # numerator e^{2y} - p11 e^y kept in log form: y + ln(e^y - p11)
    if y > 700.0:
        if p22 <= 0.0:
            if p11 >= 1.0:
                _infeasible(p11, p22, ec, theta)
            return (2.0 * y - math.log(1.0 - p11)) / theta
        return (y + math.log1p(-p11 * math.exp(-y)) - math.log(p22)) / theta
    head = math.expm1(y) + (1.0 - p11)
    den = (1.0 - p11) + p22 * math.expm1(y)
    if head <= 0.0 or den <= 0.0:
        _infeasible(p11, p22, ec, theta)
    return (y + math.log(head) - math.log(den)) / theta


def _infeasible(p11, p22, ec, theta):
    raise InfeasibleError(
        f"no DTMS ON rate matches ec={ec} at theta={theta} "
        f"(p11={p11}, p22={p22}): non-positive log argument"
    )


def max_on_rate_fms(alpha: float, beta: float, ec: float, theta: float) -> float:
    """Largest fluid ON rate whose effective bandwidth equals ``ec``.

    ``beta = 0`` is accepted and gives the always-ON limit ``ec``.
    """
    theta = check_theta(theta)
    ec = _check_ec(ec)
    y = theta * ec
    return ec * (y + alpha + beta) / (y + alpha)


def max_on_rate_mmps(alpha: float, beta: float, ec: float, theta: float) -> float:
    """Largest Poisson ON intensity whose effective bandwidth equals ``ec``.

    Solves the MMPS eigenvalue equation for the ON-state log-MGF rate and
    divides by ``e^theta - 1``.
    """
    theta = check_theta(theta)
    ec = _check_ec(ec)
    y = theta * ec
    return y * (y + alpha + beta) / (math.expm1(theta) * (y + alpha))


def max_on_rate(source: SourceModel, ec: float, theta: float) -> float:
    """Dispatch on the source type; only its transition parameters are used."""
    if isinstance(source, DtmsSource):
        return max_on_rate_dtms(source.p11, source.p22, ec, theta)
    if isinstance(source, FmsSource):
        return max_on_rate_fms(source.alpha, source.beta, ec, theta)
    if isinstance(source, MmpsSource):
        return max_on_rate_mmps(source.alpha, source.beta, ec, theta)
    raise TypeError(f"unsupported source type {type(source).__name__}")


def max_avg_rate(source: SourceModel, channel: ChannelSpec, theta: float) -> float:
    """Largest average arrival rate the link supports at exponent ``theta``.

    The source's own ``lambda_on`` is ignored; only its shape matters.
    """
    theta = check_theta(theta)
    p_on = source.p_on
    if theta < SMALL_THETA:
        return effective_capacity(channel, theta)
    ec = effective_capacity(channel, theta)
    return p_on * max_on_rate(source, ec, theta)


def solve_qos_exponent(source: SourceModel, channel: ChannelSpec) -> OperatingPoint:
    """Find the exponent where the source's effective bandwidth meets the link's
    effective capacity.

    The bracket starts at ``1e-6`` and doubles until the sign of
    ``a(theta) - C_E(theta)`` changes, then bisects.

    Raises:
        UnstableError: mean arrival rate is not below the mean service rate.
    """
    lambda_avg = steady_state(source)[1]
    mean_service = channel.mean_service
    if not lambda_avg < mean_service:
        raise UnstableError(
            f"mean arrival rate {lambda_avg:.6g} is not below mean service rate "
            f"{mean_service:.6g} bits/block; the queue grows without bound"
        )

    def gap(theta):
        return effective_bandwidth(source, theta) - effective_capacity(channel, theta)

    lo = _THETA_START
    if gap(lo) >= 0.0:
        # tiny-theta limits are exact here; the gap sign at 1e-6 is that of the means
        raise UnstableError("source and link means are too close to resolve a crossing")
    hi = lo
    while True:
        hi = min(2.0 * hi, THETA_CAP)
        if gap(hi) >= 0.0:
            break
        if hi >= THETA_CAP:
            return OperatingPoint(
                THETA_CAP,
                effective_bandwidth(source, THETA_CAP),
                effective_capacity(channel, THETA_CAP),
                capped=True,
            )
        lo = hi

    for _ in range(400):
        mid = 0.5 * (lo + hi)
        a = effective_bandwidth(source, mid)
        c = effective_capacity(channel, mid)
        if abs(a - c) <= _MATCH_RTOL * c or hi - lo <= 2 * math.ulp(hi):
            return OperatingPoint(mid, a, c)
        if a > c:
            hi = mid
        else:
            lo = mid
    raise SolverError("QoS exponent bisection did not converge", (lo, hi))


def delay_violation(theta_star: float, a_star: float, spec: DelaySpec) -> float:
    """Approximate ``Pr{D >= d}`` as ``zeta * exp(-theta* a* d)``, clamped to [0, 1]."""
    if theta_star < 0 or a_star < 0:
        raise ValueError("theta_star and a_star must be non-negative")
    return min(1.0, spec.zeta * math.exp(-theta_star * a_star * spec.d))
