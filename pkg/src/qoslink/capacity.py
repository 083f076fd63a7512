"""
Effective capacity of a fixed-rate ON/OFF link over Rayleigh block fading,
its rate derivatives, and the capacity-maximizing transmission rate.

The channel is ON in a block when the instantaneous capacity exceeds the
transmission rate, which for unit-mean exponential fading power happens with
probability ``exp(-(2**r - 1) / snr)``. Blocks are independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import SMALL_THETA, ChannelSpec, SolverError, check_theta

LN2 = math.log(2.0)

# Curvature steps below this lose the second difference to rounding.
MIN_CURVATURE_STEP = 1e-5

RATE_TOLERANCE = 1e-10
MAX_ITERATIONS = 400


@dataclass(frozen=True)
class RateOptimum:
    r_star: float
    ec_star: float
    residual: float
    iterations: int


def channel_on_probability(channel: ChannelSpec) -> float:
    return channel.on_probability


def effective_capacity(channel: ChannelSpec, theta: float) -> float:
    """``-(1/theta) ln(1 - p_on (1 - e^{-theta r}))`` in bits/block.

    For ``theta`` below ``SMALL_THETA`` the ergodic limit ``p_on * r`` is returned.
    """
    theta = check_theta(theta)
    r = channel.rate
    if r == 0.0:
        return 0.0
    p_on = channel.on_probability
    if theta < SMALL_THETA:
        return p_on * r
    return -math.log1p(p_on * math.expm1(-theta * r)) / theta


def ec_rate_gradient(channel: ChannelSpec, theta: float) -> float:
    """Closed-form derivative of the effective capacity with respect to the rate."""
    theta = check_theta(theta)
    r, snr = channel.rate, channel.snr
    p_on = channel.on_probability
    decay = math.exp(-theta * r)
    num = theta * p_on * decay + LN2 * 2.0**r * p_on * (decay - 1.0) / snr
    den = theta * (p_on * (decay - 1.0) + 1.0)
    return num / den


def ec_rate_curvature(channel: ChannelSpec, theta: float, h: float = 1e-3) -> float:
    """Central second difference of the effective capacity in the rate."""
    r = channel.rate
    if not 0.0 < h < r:
        raise ValueError(f"curvature step must satisfy 0 < h < rate, got h={h}, rate={r}")
    if h < MIN_CURVATURE_STEP:
        raise ArithmeticError(
            f"curvature step {h} is below {MIN_CURVATURE_STEP}; the second "
            "difference would be dominated by rounding"
        )
    snr = channel.snr
    up = effective_capacity(ChannelSpec(snr, r + h), theta)
    mid = effective_capacity(channel, theta)
    down = effective_capacity(ChannelSpec(snr, r - h), theta)
    return (up - 2.0 * mid + down) / (h * h)


def _rate_fixed_point_map(r: float, snr: float, theta: float) -> float:
    # Stationarity condition of the effective capacity rearranged as r = F(r).
    # log1p(x)/theta tends to x as theta -> 0, giving the ergodic condition.
    x = snr * theta / (2.0**r * LN2)
    return math.log1p(x) / theta


def rate_residual(r: float, snr: float, theta: float) -> float:
    """``r - F(r)``; strictly increasing in ``r`` with a single root at the optimum."""
    return r - _rate_fixed_point_map(r, snr, check_theta(theta))


def optimal_rate(snr: float, theta: float, tol: float = RATE_TOLERANCE) -> RateOptimum:
    """Transmission rate maximizing the effective capacity.

    Bisection on ``rate_residual``. Plain fixed-point iteration on the same map
    oscillates for moderate SNR, so it is not used.

    Raises:
        SolverError: if the residual does not reach ``tol`` within
            ``MAX_ITERATIONS`` halvings.
    """
    theta = check_theta(theta)
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    lo = 0.0
    # beyond threshold 40 the ON probability is below 5e-18
    hi = math.log2(1.0 + snr * 40.0)
    while rate_residual(hi, snr, theta) <= 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            raise SolverError("could not bracket the optimal rate", (lo, hi))

    iterations = 0
    r = 0.5 * (lo + hi)
    g = rate_residual(r, snr, theta)
    while abs(g) > tol:
        if iterations >= MAX_ITERATIONS or hi - lo <= 4 * math.ulp(hi):
            raise SolverError("optimal rate bisection did not converge", (lo, hi))
        if g > 0.0:
            hi = r
        else:
            lo = r
        r = 0.5 * (lo + hi)
        g = rate_residual(r, snr, theta)
        iterations += 1

    ec = effective_capacity(ChannelSpec(snr, r), theta)
    return RateOptimum(r_star=r, ec_star=ec, residual=abs(g), iterations=iterations)
