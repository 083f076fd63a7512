"""
Parameter sweeps behind the four result figures, emitted as CSV tables.

Burstiness is parameterized by P_ON alone: the DTMS source is memoryless
(``p11 = 1 - P_ON``, ``p22 = P_ON``) and the FMS/MMPS sources use
``alpha = P_ON``, ``beta = 1 - P_ON`` (one expected transition per block).

Columns per figure:

fig3  ec, dtms, fms, mmps
      maximum average arrival rate vs effective capacity (theta, P_ON fixed)
fig4  rate, ec, dtms, fms, mmps
      maximum average arrival rate vs transmission rate (SNR, theta, P_ON fixed)
fig5  snr_db, p_on, ec_star, dtms, fms, mmps
      maximum ON-state rate vs P_ON at the optimal rate, one block per SNR
fig6  panel, x, dtms, fms, mmps
      delay-violation probability; panel ``snr`` and ``p_on`` hold the
      average arrival rate fixed and use the exponent where source and link
      meet; panel ``theta`` admits each source at its maximum rate for the
      target exponent, so the operating exponent is theta itself.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .capacity import effective_capacity, optimal_rate
from .core import ChannelSpec, DtmsSource, FmsSource, MmpsSource, db_to_linear
from .matching import (
    DelaySpec,
    delay_violation,
    max_on_rate_dtms,
    max_on_rate_fms,
    max_on_rate_mmps,
    solve_qos_exponent,
)

FIGURES = ("fig3", "fig4", "fig5", "fig6")

HEADERS = {
    "fig3": ["ec", "dtms", "fms", "mmps"],
    "fig4": ["rate", "ec", "dtms", "fms", "mmps"],
    "fig5": ["snr_db", "p_on", "ec_star", "dtms", "fms", "mmps"],
    "fig6": ["panel", "x", "dtms", "fms", "mmps"],
}


@dataclass(frozen=True)
class SweepOptions:
    theta: float = 1.0
    p_on: float = 0.2
    snr_db: float = 10.0
    snr_db_values: Tuple[float, ...] = (0.0, 10.0, 20.0)
    ec_max: float = 3.0
    ec_step: float = 0.05
    rate_max: float = 6.0
    rate_step: float = 0.01
    p_on_step: float = 0.05
    # fig6
    lambda_avg: float = 1.0
    d: float = 5.0
    zeta: float = 1.0
    fig6_p_on: float = 0.5
    fig6_snr_db: Tuple[float, float, float] = (8.0, 24.0, 1.0)
    fig6_theta: Tuple[float, float, float] = (0.1, 5.0, 0.1)
    fig6_p_on_range: Tuple[float, float, float] = (0.1, 0.95, 0.05)

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]


def _grid(start: float, stop: float, step: float) -> np.ndarray:
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def on_rates(ec: float, theta: float, p_on: float) -> Tuple[float, float, float]:
    """Maximum ON rates (DTMS, FMS, MMPS) at one effective capacity."""
    return (
        max_on_rate_dtms(1.0 - p_on, p_on, ec, theta),
        max_on_rate_fms(p_on, 1.0 - p_on, ec, theta),
        max_on_rate_mmps(p_on, 1.0 - p_on, ec, theta),
    )


def fig3(opts: SweepOptions) -> List[list]:
    rows = []
    for ec in _grid(opts.ec_step, opts.ec_max, opts.ec_step):
        rows.append([ec] + [opts.p_on * lam for lam in on_rates(ec, opts.theta, opts.p_on)])
    return rows


def fig4(opts: SweepOptions) -> List[list]:
    snr = db_to_linear(opts.snr_db)
    rows = []
    for r in _grid(opts.rate_step, opts.rate_max, opts.rate_step):
        ec = effective_capacity(ChannelSpec(snr, r), opts.theta)
        if ec <= 0.0:
            rows.append([r, ec, 0.0, 0.0, 0.0])
            continue
        rows.append([r, ec] + [opts.p_on * lam for lam in on_rates(ec, opts.theta, opts.p_on)])
    return rows


def fig5(opts: SweepOptions) -> List[list]:
    rows = []
    p_grid = _grid(opts.p_on_step, 1.0, opts.p_on_step)
    for snr_db in opts.snr_db_values:
        ec_star = optimal_rate(db_to_linear(snr_db), opts.theta).ec_star
        for p in p_grid:
            p = min(p, 1.0)
            rows.append([snr_db, p, ec_star] + list(on_rates(ec_star, opts.theta, p)))
    return rows


def _sources(p_on: float, lambda_avg: float):
    lam = lambda_avg / p_on
    return (
        DtmsSource.memoryless(p_on, lam),
        FmsSource.from_p_on(p_on, lam),
        MmpsSource.from_p_on(p_on, lam),
    )


def _matched_violation(source, channel, spec: DelaySpec) -> float:
    op = solve_qos_exponent(source, channel)
    return delay_violation(op.theta, op.effective_bandwidth, spec)


def fig6(opts: SweepOptions) -> List[list]:
    spec = DelaySpec(opts.d, opts.zeta)
    rows = []
    for snr_db in _grid(*opts.fig6_snr_db):
        snr = db_to_linear(snr_db)
        channel = ChannelSpec(snr, optimal_rate(snr, opts.theta).r_star)
        probs = [_matched_violation(s, channel, spec) for s in _sources(opts.fig6_p_on, opts.lambda_avg)]
        rows.append(["snr", snr_db] + probs)
    snr = db_to_linear(opts.snr_db)
    for theta in _grid(*opts.fig6_theta):
        ec_star = optimal_rate(snr, theta).ec_star
        prob = delay_violation(theta, ec_star, spec)
        rows.append(["theta", theta, prob, prob, prob])
    channel = ChannelSpec(snr, optimal_rate(snr, opts.theta).r_star)
    for p_on in _grid(*opts.fig6_p_on_range):
        probs = [_matched_violation(s, channel, spec) for s in _sources(p_on, opts.lambda_avg)]
        rows.append(["p_on", p_on] + probs)
    return rows


BUILDERS: Dict[str, Callable[[SweepOptions], List[list]]] = {
    "fig3": fig3,
    "fig4": fig4,
    "fig5": fig5,
    "fig6": fig6,
}


def sweep(figure: str, opts: SweepOptions = SweepOptions()) -> Tuple[List[str], List[list]]:
    if figure not in BUILDERS:
        raise ValueError(f"unknown figure {figure!r}; expected one of {', '.join(FIGURES)}")
    return HEADERS[figure], BUILDERS[figure](opts)


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    return f"{float(value):.9g}"


def write_csv(path_or_file, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    """Write rows with floats at 9 significant digits."""
    if hasattr(path_or_file, "write"):
        _write(path_or_file, header, rows)
        return
    with open(path_or_file, "w", newline="") as fh:
        _write(fh, header, rows)


def _write(fh, header, rows):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
