"""
Command-line front end.

    qoslink [--seed N] [--config PATH] analyze
    qoslink [--config PATH] sweep --figure {fig3,fig4,fig5,fig6} [--out PATH]
    qoslink [--seed N] --config PATH validate [--out PATH] [--trace PATH]

Exit codes: 0 success, 2 invalid configuration or usage, 3 infeasible or
unstable analytics, 4 Monte Carlo disagreement with a closed form.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from typing import List, Optional

import numpy as np

from . import oracle
from .bandwidth import effective_bandwidth
from .capacity import effective_capacity, optimal_rate
from .config import ConfigError, RunConfig, load_config, require
from .core import QosError, steady_state
from .matching import DelaySpec, delay_violation, max_on_rate, solve_qos_exponent
from .sweeps import FIGURES, HEADERS, sweep, write_csv

EXIT_CONFIG = 2
EXIT_ANALYTIC = 3
EXIT_DISAGREE = 4

_SWEEP_HELP = "CSV columns: " + "; ".join(f"{k}: {', '.join(v)}" for k, v in HEADERS.items())


def _operating_point(cfg: RunConfig):
    """Source and channel the analyses run on, plus the optimal-rate result."""
    require(cfg, "source", "snr_db", "theta")
    theta = cfg.theta
    opt = optimal_rate(cfg.snr, theta)
    rate = cfg.rate if cfg.rate is not None else opt.r_star
    channel = cfg.channel(rate)
    ec = effective_capacity(channel, theta)
    lambda_on_star = max_on_rate(cfg.source, ec, theta)
    source = cfg.source
    if not cfg.source_has_rate:
        source = dataclasses.replace(source, lambda_on=lambda_on_star)
    return source, channel, opt, ec, lambda_on_star


def _sim_config(cfg: RunConfig, source, channel) -> oracle.SimConfig:
    s = cfg.sim
    return oracle.SimConfig(
        source=source,
        channel=channel,
        n_blocks=s.n_blocks,
        n_replications=s.n_replications,
        seed=s.seed,
        warmup_blocks=s.warmup_blocks,
        blowup_bound=s.blowup_bound,
    )


def analyze(cfg: RunConfig) -> dict:
    source, channel, opt, ec, lambda_on_star = _operating_point(cfg)
    theta = cfg.theta
    p_on, lambda_avg = steady_state(source)
    op = solve_qos_exponent(source, channel)

    if cfg.zeta == "simulate":
        traces = oracle.run_replications(_sim_config(cfg, source, channel))
        zeta = float(np.mean([t.zeta_hat for t in traces]))
    else:
        zeta = cfg.zeta
    delays = []
    for d in cfg.delays:
        prob = delay_violation(op.theta, op.effective_bandwidth, DelaySpec(d, zeta)) if zeta > 0 else 0.0
        delays.append({"d": d, "probability": prob})

    return {
        "source": type(source).__name__,
        "snr_db": cfg.snr_db,
        "snr": cfg.snr,
        "theta": theta,
        "rate": channel.rate,
        "channel_on_probability": channel.on_probability,
        "p_on": p_on,
        "lambda_on": source.lambda_on,
        "lambda_avg": lambda_avg,
        "effective_bandwidth": effective_bandwidth(source, theta),
        "effective_capacity": ec,
        "r_star": opt.r_star,
        "ec_star": opt.ec_star,
        "lambda_on_star": lambda_on_star,
        "lambda_avg_star": p_on * lambda_on_star,
        "theta_star": op.theta,
        "theta_star_capped": op.capped,
        "a_star": op.effective_bandwidth,
        "zeta": zeta,
        "delay_violation": delays,
    }


def _check(name, passed, estimate, closed_form, tolerance, **extra) -> dict:
    record = {
        "name": name,
        "passed": bool(passed),
        "estimate": estimate,
        "closed_form": closed_form,
        "tolerance": tolerance,
        "interval": [closed_form - tolerance, closed_form + tolerance],
    }
    record.update(extra)
    return record


def _batch_mean_se(x: np.ndarray, n_batches: int = 100) -> float:
    usable = len(x) - len(x) % n_batches
    means = x[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def validate(cfg: RunConfig, trace_path: Optional[str] = None) -> dict:
    """Run the Monte Carlo oracle against every closed form.

    ``qos.theta`` is taken as the claimed operating exponent: the empirical
    delay-tail slope is compared with ``-theta * a(theta)``.
    """
    source, channel, _, _, _ = _operating_point(cfg)
    s = cfg.sim
    theta = cfg.theta
    k = s.n_sigma
    sim = _sim_config(cfg, source, channel)
    checks: List[dict] = []

    traces = list(oracle.run_replications(sim))
    if trace_path:
        traces[0].write_csv(trace_path)
    on = np.concatenate([t.service_on[s.warmup_blocks:] for t in traces])
    arrivals = np.concatenate([t.arrivals_per_block[s.warmup_blocks:] for t in traces])

    p = channel.on_probability
    se = math.sqrt(p * (1 - p) / len(on))
    checks.append(_check("channel_on_fraction", abs(on.mean() - p) <= k * se, float(on.mean()), p, k * se))

    lambda_avg = steady_state(source)[1]
    se = _batch_mean_se(arrivals)
    checks.append(
        _check("mean_arrival_rate", abs(arrivals.mean() - lambda_avg) <= k * se + 1e-12,
               float(arrivals.mean()), lambda_avg, k * se)
    )

    t = s.horizon
    est = oracle.estimate_eb(oracle.sample_arrival_paths(source, t, s.paths, s.seed), theta)
    est2 = oracle.estimate_eb(oracle.sample_arrival_paths(source, 2 * t, s.paths, s.seed), theta)
    closed = effective_bandwidth(source, theta)
    checks.append(
        _check("effective_bandwidth", abs(est.value - closed) <= k * est.std_error + 1e-12,
               est.value, closed, k * est.std_error, std_error=est.std_error, horizon=t,
               horizon_drift=oracle.horizon_drift(est, est2, k))
    )

    est = oracle.estimate_ec(oracle.sample_service_paths(channel, t, s.paths, s.seed), channel.rate, theta)
    est2 = oracle.estimate_ec(
        oracle.sample_service_paths(channel, 2 * t, s.paths, s.seed), channel.rate, theta
    )
    closed = effective_capacity(channel, theta)
    checks.append(
        _check("effective_capacity", abs(est.value - closed) <= k * est.std_error + 1e-12,
               est.value, closed, k * est.std_error, std_error=est.std_error, horizon=t,
               horizon_drift=oracle.horizon_drift(est, est2, k))
    )

    worst = 0.0
    for tr in traces:
        total = tr.arrivals_per_block.sum()
        gap = abs(tr.departures().sum() - (total - tr.queue_bits[-1]))
        worst = max(worst, gap / max(1.0, total))
    checks.append(_check("conservation", worst <= 1e-9, worst, 0.0, 1e-9))

    unstable = any(tr.unstable for tr in traces)
    checks.append(_check("stability", not unstable, float(unstable), 0.0, 0.0))

    predicted = -theta * effective_bandwidth(source, theta)
    try:
        fits = [oracle.fit_tail_slope(tr, s.tail_d_min, s.tail_d_max, s.min_tail_events) for tr in traces]
        slope = float(np.mean([f.slope for f in fits]))
        d_used = [int(d) for d in fits[0].d_used]
        ok = abs(slope - predicted) <= s.tail_rtol * abs(predicted)
    except ValueError:
        slope, d_used, ok = float("nan"), [], False
    checks.append(
        _check("delay_tail_slope", ok, slope, predicted, s.tail_rtol * abs(predicted), d_used=d_used)
    )

    return {
        "source": type(source).__name__,
        "theta": theta,
        "rate": channel.rate,
        "seed": s.seed,
        "zeta_hat": float(np.mean([tr.zeta_hat for tr in traces])),
        "passed": all(c["passed"] for c in checks),
        "checks": checks,
    }


def _emit_json(payload: dict, out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2, sort_keys=False) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override sim.seed for randomized commands")
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON configuration file")

    parser = argparse.ArgumentParser(
        prog="qoslink",
        parents=[common],
        description="Effective bandwidth/capacity analysis of a fixed-rate Rayleigh link.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="print the analytic link report as JSON")
    sw = sub.add_parser("sweep", parents=[common], help="write a figure sweep as CSV", epilog=_SWEEP_HELP)
    sw.add_argument("--figure", required=True, choices=FIGURES)
    sw.add_argument("--out", help="CSV path (default: stdout)")
    va = sub.add_parser("validate", parents=[common], help="check closed forms against simulation")
    va.add_argument("--out", help="JSON report path (default: stdout)")
    va.add_argument("--trace", help="dump the first simulated trace as CSV")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    config_path = getattr(args, "config", None)
    try:
        if config_path is None:
            if args.command != "sweep":
                raise ConfigError(["config: --config is required for " + args.command])
            cfg = RunConfig()
        else:
            cfg = load_config(config_path)
        if getattr(args, "seed", None) is not None:
            if args.seed < 0:
                raise ConfigError(["--seed: must be non-negative"])
            cfg.sim = dataclasses.replace(cfg.sim, seed=args.seed)

        if args.command == "analyze":
            _emit_json(analyze(cfg), None)
        elif args.command == "sweep":
            header, rows = sweep(args.figure, cfg.sweep)
            write_csv(args.out or sys.stdout, header, rows)
        else:
            report = validate(cfg, args.trace)
            _emit_json(report, args.out)
            if not report["passed"]:
                failed = ", ".join(c["name"] for c in report["checks"] if not c["passed"])
                print(f"qoslink: oracle disagreement: {failed}", file=sys.stderr)
                return EXIT_DISAGREE
    except ConfigError as exc:
        for err in exc.errors:
            print(f"qoslink: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (QosError, ValueError, ArithmeticError) as exc:
        print(f"qoslink: {exc}", file=sys.stderr)
        return EXIT_ANALYTIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
