"""Closed-form effective bandwidth of the two-state Markov sources."""

from __future__ import annotations

import math

from .core import (
    SMALL_THETA,
    DtmsSource,
    FmsSource,
    MmpsSource,
    SourceModel,
    check_theta,
    steady_state,
)

# Above this value of theta * lambda the DTMS formula is evaluated with
# e^{theta lambda} factored out of the square root.
_DTMS_LOG_SPACE = 30.0


def eb_dtms(source: DtmsSource, theta: float) -> float:
    """Effective bandwidth of a discrete-time ON/OFF Markov source.

    ``a = (1/theta) ln(rho)`` where ``rho`` is the Perron root of the tilted
    transition matrix, ``rho = (b + sqrt(b^2 - 4 (p11 + p22 - 1) e^x)) / 2``
    with ``x = theta * lambda_on`` and ``b = p11 + p22 e^x``.
    """
    theta = check_theta(theta)
    if theta < SMALL_THETA:
        return steady_state(source)[1]
    p11, p22 = source.p11, source.p22
    x = theta * source.lambda_on
    if x == 0.0:
        return 0.0
    # b^2 - 4 (p11 + p22 - 1) e^x rewritten as a sum of non-negative terms
    if x > _DTMS_LOG_SPACE:
        # everything scaled by e^{-x}
        ex = math.exp(-x)
        b = p11 * ex + p22
        disc = (p11 * ex - p22) ** 2 + 4.0 * (1.0 - p11) * (1.0 - p22) * ex
        log_rho = x + math.log(0.5 * (b + _sqrt(disc)))
    else:
        ex = math.exp(x)
        b = p11 + p22 * ex
        disc = (p11 - p22 * ex) ** 2 + 4.0 * (1.0 - p11) * (1.0 - p22) * ex
        log_rho = math.log(0.5 * (b + _sqrt(disc)))
    return log_rho / theta


def _sqrt(disc: float) -> float:
    if disc < 0.0:
        raise ArithmeticError(f"negative discriminant {disc} in effective bandwidth")
    return math.sqrt(disc)


def _ctmc_eb(x: float, alpha: float, beta: float, theta: float) -> float:
    # Largest eigenvalue of [[-alpha, alpha], [beta, x - beta]] divided by theta,
    # where x is the ON-state log-MGF rate (theta*lambda for fluid,
    # (e^theta - 1)*lambda for Poisson).
    if math.isinf(x):
        return math.inf
    b = x - (alpha + beta)
    c = 4.0 * alpha * x
    root = math.sqrt(b * b + c)
    if b >= 0.0:
        return (b + root) / (2.0 * theta)
    # rationalized to avoid cancelling b against root
    return c / (2.0 * theta * (root - b))


def eb_fms(source: FmsSource, theta: float) -> float:
    """Effective bandwidth of a Markov fluid source."""
    theta = check_theta(theta)
    if theta < SMALL_THETA:
        return steady_state(source)[1]
    return _ctmc_eb(theta * source.lambda_on, source.alpha, source.beta, theta)


def eb_mmps(source: MmpsSource, theta: float) -> float:
    """Effective bandwidth of a Markov-modulated Poisson source (unit-bit arrivals)."""
    theta = check_theta(theta)
    if theta < SMALL_THETA:
        return steady_state(source)[1]
    try:
        x = math.expm1(theta) * source.lambda_on
    except OverflowError:
        x = math.inf if source.lambda_on > 0 else 0.0
    return _ctmc_eb(x, source.alpha, source.beta, theta)


def effective_bandwidth(source: SourceModel, theta: float) -> float:
    """Dispatch to the closed form matching the source type."""
    if isinstance(source, DtmsSource):
        return eb_dtms(source, theta)
    if isinstance(source, FmsSource):
        return eb_fms(source, theta)
    if isinstance(source, MmpsSource):
        return eb_mmps(source, theta)
    raise TypeError(f"unsupported source type {type(source).__name__}")
