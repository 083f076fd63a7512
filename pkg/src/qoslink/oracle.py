"""
Monte Carlo oracle for the closed forms.

Generates Markov-modulated traffic and ON/OFF Rayleigh service, runs the
discrete-time FIFO fluid queue ``q[k] = max(0, q[k-1] + a[k] - s[k])`` and
estimates effective bandwidth, effective capacity and the delay tail
empirically.

Random streams
--------------
Every random draw comes from a PCG64 generator seeded by
``SeedSequence(seed, spawn_key=key)``:

* queue trace ``i`` of a ``SimConfig``: key ``(0, i, 0)`` for arrivals and
  ``(0, i, 1)`` for the channel;
* a batch of short estimation paths of horizon ``t``: key ``(1, t, 0)`` for
  arrivals and ``(1, t, 1)`` for the channel.

Keys are part of the reproducibility contract and must not change.

Within a block, arrivals join the queue before that block's service is
applied, so a bit served in its arrival block has delay 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import accumulate
from typing import Iterator, NamedTuple, Optional, Sequence, Union

import numpy as np

from .core import (
    ChannelSpec,
    DtmsSource,
    FmsSource,
    MmpsSource,
    SourceModel,
    check_theta,
    steady_state,
)

TRACE_STREAM = 0
BATCH_STREAM = 1
ARRIVALS = 0
CHANNEL = 1

RngLike = Union[None, int, np.random.Generator]


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, key)``; see the module docstring."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _rng(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


# --------------------------------------------------------------------------
# traffic and channel generators
# --------------------------------------------------------------------------


def gen_channel_states(
    channel: ChannelSpec, n_blocks: int, rng: RngLike = None, n_paths: Optional[int] = None
) -> np.ndarray:
    """ON/OFF state per block: ON iff ``log2(1 + snr * z) > rate`` with ``z ~ Exp(1)``.

    Returns a boolean array of shape ``(n_blocks,)`` or ``(n_paths, n_blocks)``.
    """
    rng = _rng(rng)
    shape = (n_blocks,) if n_paths is None else (n_paths, n_blocks)
    threshold = channel.threshold
    z = rng.standard_exponential(shape)
    if threshold == 0.0:
        return np.ones(shape, dtype=bool)
    return z > threshold


def _sojourn_sampler(source: SourceModel, horizon: int):
    """Return ``(draw_off, draw_on)`` sojourn-length samplers in blocks."""
    if isinstance(source, DtmsSource):
        # an infinite sojourn is represented by one longer than the horizon
        never = float(horizon + 1)

        def geometric(stay):
            if stay >= 1.0:
                return lambda rng, shape: np.full(shape, never)
            return lambda rng, shape: rng.geometric(1.0 - stay, shape).astype(float)

        return geometric(source.p11), geometric(source.p22)

    def exponential(rate):
        return lambda rng, shape: rng.standard_exponential(shape) / rate

    return exponential(source.alpha), exponential(source.beta)


def _mean_sojourn(source: SourceModel) -> tuple:
    if isinstance(source, DtmsSource):
        off = math.inf if source.p11 >= 1.0 else 1.0 / (1.0 - source.p11)
        on = math.inf if source.p22 >= 1.0 else 1.0 / (1.0 - source.p22)
        return off, on
    return 1.0 / source.alpha, 1.0 / source.beta


def on_time_per_block(
    source: SourceModel, n_blocks: int, rng: RngLike = None, n_paths: Optional[int] = None
) -> np.ndarray:
    """Fraction of each block the source spends ON, from a stationary start.

    DTMS sojourns are geometric (so each block is fully ON or OFF); FMS/MMPS
    sojourns are exponential and may end mid-block.
    """
    rng = _rng(rng)
    paths = 1 if n_paths is None else n_paths
    draw_off, draw_on = _sojourn_sampler(source, n_blocks)
    p_on = source.p_on
    state0 = rng.random(paths) < p_on

    m_off, m_on = _mean_sojourn(source)
    expected = 2.0 * n_blocks / (m_off + m_on) if math.isfinite(m_off + m_on) else 0.0
    chunk = int(1.1 * expected + 5.0 * math.sqrt(expected) + 4)

    durations, states = [], []
    total = np.zeros(paths)
    done = 0
    while total.min() < n_blocks:
        parity = (np.arange(done, done + chunk) % 2).astype(bool)
        on = state0[:, None] ^ parity[None, :]
        dur = np.where(on, draw_on(rng, (paths, chunk)), draw_off(rng, (paths, chunk)))
        durations.append(dur)
        states.append(on)
        total += dur.sum(axis=1)
        done += chunk
    dur = np.concatenate(durations, axis=1)
    on = np.concatenate(states, axis=1)

    ends = np.cumsum(dur, axis=1)
    on_cum = np.cumsum(dur * on, axis=1)
    starts = ends - dur
    on_before = on_cum - dur * on

    # locate the sojourn covering each integer time t = 1..n for every path at once
    span = float(n_blocks) + 1.0
    offsets = np.arange(paths)[:, None] * span
    flat_ends = (np.minimum(ends, span) + offsets).ravel()
    t = np.arange(1, n_blocks + 1, dtype=float)
    idx = np.searchsorted(flat_ends, (t[None, :] + offsets).ravel(), side="left")
    rows = np.arange(paths)[:, None]
    idx = idx.reshape(paths, n_blocks) - rows * dur.shape[1]
    covered = on_before[rows, idx] + on[rows, idx] * (t[None, :] - starts[rows, idx])
    cumulative = np.concatenate([np.zeros((paths, 1)), covered], axis=1)
    frac = np.clip(np.diff(cumulative, axis=1), 0.0, 1.0)
    return frac[0] if n_paths is None else frac


def gen_arrivals(
    source: SourceModel, n_blocks: int, rng: RngLike = None, n_paths: Optional[int] = None
) -> np.ndarray:
    """Bits arriving in each block.

    DTMS and FMS contribute ``lambda_on`` times the ON fraction of the block.
    MMPS draws ``Poisson(lambda_on * ON time)`` unit-bit arrivals per block,
    which is exactly the count a Poisson process run over the ON periods
    would leave in that block.
    """
    rng = _rng(rng)
    frac = on_time_per_block(source, n_blocks, rng, n_paths)
    if source.lambda_on == 0.0:
        return np.zeros_like(frac)
    if isinstance(source, MmpsSource):
        return rng.poisson(source.lambda_on * frac).astype(float)
    return source.lambda_on * frac


# --------------------------------------------------------------------------
# queue simulation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    source: SourceModel
    channel: ChannelSpec
    n_blocks: int
    n_replications: int = 1
    seed: int = 0
    warmup_blocks: int = 0
    # final backlog (bits) beyond which an overloaded queue is flagged unstable
    blowup_bound: float = 1e3

    def __post_init__(self):
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be at least 1")
        if self.n_replications < 1:
            raise ValueError("n_replications must be at least 1")
        if not 0 <= self.warmup_blocks < self.n_blocks:
            raise ValueError("warmup_blocks must satisfy 0 <= warmup_blocks < n_blocks")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass
class SimTrace:
    """One simulated queue path.

    ``queue_bits[k]`` is the backlog at the end of block ``k``;
    ``delay_samples`` holds, for each post-warmup block with arrivals, the
    delay of its last bit (uncensored blocks only).
    """

    arrivals_per_block: np.ndarray
    service_on: np.ndarray
    queue_bits: np.ndarray
    delay_samples: np.ndarray
    zeta_hat: float
    rate: float
    warmup_blocks: int = 0
    unstable: bool = False
    _on_count: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_blocks(self) -> int:
        return len(self.arrivals_per_block)

    @property
    def service_bits(self) -> np.ndarray:
        return self.rate * self.service_on

    @property
    def queue_before(self) -> np.ndarray:
        """Backlog at the start of each block."""
        return np.concatenate([[0.0], self.queue_bits[:-1]])

    def departures(self) -> np.ndarray:
        return self.queue_before + self.arrivals_per_block - self.queue_bits

    @property
    def on_count(self) -> np.ndarray:
        """``on_count[m]`` = number of ON blocks among the first ``m``."""
        if self._on_count is None:
            self._on_count = np.concatenate([[0], np.cumsum(self.service_on, dtype=np.int64)])
        return self._on_count

    def delay_ccdf(self, d_values: Sequence[int]) -> np.ndarray:
        """Fraction of post-warmup arriving bits with delay ``>= d``.

        Bits of block ``k`` sit at queue positions ``(q_before[k], q_before[k] + a[k]]``;
        those beyond the service offered in blocks ``k .. k+d-1`` wait at least
        ``d`` blocks. Blocks whose ``d``-block window runs past the trace are
        left out of both numerator and denominator.
        """
        a = self.arrivals_per_block
        q0 = self.queue_before
        backlog = q0 + a
        n, w = self.n_blocks, self.warmup_blocks
        out = np.empty(len(d_values))
        for i, d in enumerate(d_values):
            d = int(d)
            if d < 0:
                raise ValueError("delay thresholds must be non-negative")
            stop = n - d + 1 if d > 0 else n
            if stop <= w:
                out[i] = np.nan
                continue
            ks = slice(w, stop)
            total = a[ks].sum()
            if total == 0.0:
                out[i] = 0.0
                continue
            if d == 0:
                out[i] = 1.0
                continue
            served = self.rate * (self.on_count[w + d : stop + d] - self.on_count[w:stop])
            waiting = np.clip(backlog[ks] - np.maximum(q0[ks], served), 0.0, None)
            out[i] = waiting.sum() / total
        return out

    def write_csv(self, path) -> None:
        """Dump ``block, arrival_bits, on, queue_bits`` one row per block."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["block", "arrival_bits", "on", "queue_bits"])
            for k, (a, on, q) in enumerate(
                zip(self.arrivals_per_block, self.service_on, self.queue_bits)
            ):
                writer.writerow([k, f"{a:.9g}", int(on), f"{q:.9g}"])


def lindley(increments: np.ndarray) -> np.ndarray:
    """Backlog after each step of ``q = max(0, q + x)`` started from zero."""
    steps = accumulate(
        increments.tolist(), lambda q, x: q + x if q + x > 0.0 else 0.0, initial=0.0
    )
    out = np.fromiter(steps, dtype=float, count=len(increments) + 1)
    return out[1:]


def _last_bit_delays(
    arrivals: np.ndarray, q_before: np.ndarray, on_count: np.ndarray, rate: float, warmup: int
) -> np.ndarray:
    ks = np.flatnonzero(arrivals[warmup:] > 0.0) + warmup
    if rate == 0.0 or len(ks) == 0:
        return np.empty(0)
    backlog = q_before[ks] + arrivals[ks]
    # ON blocks needed to clear the backlog; tolerance absorbs Lindley rounding
    needed = np.ceil(backlog / rate - 1e-9).astype(np.int64)
    target = on_count[ks] + np.maximum(needed, 1)
    m = np.searchsorted(on_count, target, side="left")
    done = m <= len(arrivals)
    return (m[done] - 1 - ks[done]).astype(float)


def simulate_queue(config: SimConfig, replication: int = 0) -> SimTrace:
    """Simulate replication ``replication`` of ``config`` from an empty queue."""
    if not 0 <= replication < config.n_replications:
        raise ValueError(f"replication index {replication} out of range")
    n = config.n_blocks
    arrivals = gen_arrivals(
        config.source, n, substream(config.seed, TRACE_STREAM, replication, ARRIVALS)
    )
    on = gen_channel_states(
        config.channel, n, substream(config.seed, TRACE_STREAM, replication, CHANNEL)
    )
    rate = config.channel.rate
    queue = lindley(arrivals - rate * on)

    w = config.warmup_blocks
    zeta_hat = float(np.mean(queue[w:] > 0.0))
    trace = SimTrace(arrivals, on, queue, np.empty(0), zeta_hat, rate, w)
    trace.delay_samples = _last_bit_delays(arrivals, trace.queue_before, trace.on_count, rate, w)
    lambda_avg = steady_state(config.source)[1]
    trace.unstable = bool(
        queue[-1] > config.blowup_bound and lambda_avg >= config.channel.mean_service
    )
    return trace


def run_replications(config: SimConfig) -> Iterator[SimTrace]:
    for i in range(config.n_replications):
        yield simulate_queue(config, i)


class TailFit(NamedTuple):
    slope: float
    intercept: float
    d_used: np.ndarray
    ccdf: np.ndarray


def fit_tail_slope(
    trace: SimTrace, d_lo: int = 5, d_hi: int = 25, min_events: int = 100
) -> TailFit:
    """Least-squares slope of ``ln Pr{D >= d}`` over ``d_lo <= d <= d_hi``.

    Only thresholds exceeded by at least ``min_events`` arrival blocks are
    used; deeper points rest on a handful of busy periods.

    Raises:
        ValueError: fewer than three usable thresholds.
    """
    ds = np.arange(d_lo, d_hi + 1)
    events = np.array([(trace.delay_samples >= d).sum() for d in ds])
    ds = ds[events >= min_events]
    if len(ds) < 3:
        raise ValueError(
            f"only {len(ds)} delay thresholds in [{d_lo}, {d_hi}] have {min_events}+ "
            "tail events; simulate more blocks"
        )
    ccdf = trace.delay_ccdf(ds)
    keep = ccdf > 0
    ds, ccdf = ds[keep], ccdf[keep]
    slope, intercept = np.polyfit(ds, np.log(ccdf), 1)
    return TailFit(float(slope), float(intercept), ds, ccdf)


# --------------------------------------------------------------------------
# log-MGF estimators
# --------------------------------------------------------------------------


class Estimate(NamedTuple):
    value: float
    std_error: float


def log_mean_exp(x: np.ndarray) -> Estimate:
    """``ln mean(e^x)`` and its delta-method standard error."""
    x = np.asarray(x, dtype=float)
    shift = x.max()
    w = np.exp(x - shift)
    mean_w = w.mean()
    n = len(w)
    se = w.std(ddof=1) / (math.sqrt(n) * mean_w) if n > 1 else 0.0
    return Estimate(float(shift + math.log(mean_w)), float(se))


def _windows(values, horizon_t: Optional[int], n_replications: Optional[int]) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim == 2:
        if horizon_t is not None and values.shape[1] != horizon_t:
            raise ValueError("path length does not match horizon_t")
        if n_replications is not None and values.shape[0] != n_replications:
            raise ValueError("number of paths does not match n_replications")
        return values
    if horizon_t is None:
        raise ValueError("horizon_t is required for a one-dimensional sequence")
    reps = len(values) // horizon_t if n_replications is None else n_replications
    if reps * horizon_t > len(values) or reps < 1:
        raise ValueError("sequence too short for the requested windows")
    return values[: reps * horizon_t].reshape(reps, horizon_t)


def estimate_eb(arrivals, theta: float, horizon_t: Optional[int] = None,
                n_replications: Optional[int] = None) -> Estimate:
    """Empirical effective bandwidth ``(1/theta t) ln mean e^{theta A(t)}``.

    ``arrivals`` is either a ``(replications, t)`` array of independent paths
    or one long sequence cut into consecutive windows of ``horizon_t`` blocks.
    """
    theta = check_theta(theta)
    paths = _windows(arrivals, horizon_t, n_replications)
    t = paths.shape[1]
    est = log_mean_exp(theta * paths.sum(axis=1))
    scale = theta * t
    return Estimate(est.value / scale, est.std_error / scale)


def estimate_ec(service_on, rate: float, theta: float, horizon_t: Optional[int] = None,
                n_replications: Optional[int] = None) -> Estimate:
    """Empirical effective capacity ``-(1/theta t) ln mean e^{-theta S(t)}``."""
    theta = check_theta(theta)
    paths = _windows(service_on, horizon_t, n_replications)
    t = paths.shape[1]
    est = log_mean_exp(-theta * rate * paths.sum(axis=1))
    scale = theta * t
    return Estimate(-est.value / scale, est.std_error / scale)


def sample_arrival_paths(source: SourceModel, horizon_t: int, n_replications: int,
                         seed: int) -> np.ndarray:
    """``(n_replications, horizon_t)`` independent stationary arrival paths."""
    rng = substream(seed, BATCH_STREAM, horizon_t, ARRIVALS)
    return gen_arrivals(source, horizon_t, rng, n_paths=n_replications)


def sample_service_paths(channel: ChannelSpec, horizon_t: int, n_replications: int,
                         seed: int) -> np.ndarray:
    rng = substream(seed, BATCH_STREAM, horizon_t, CHANNEL)
    return gen_channel_states(channel, horizon_t, rng, n_paths=n_replications)


def horizon_drift(first: Estimate, second: Estimate, n_sigma: float = 3.0) -> bool:
    """True when estimates at two horizons disagree beyond their joint error band.

    The definitions are ``t -> infinity`` limits, so a significant change
    between ``t`` and ``2t`` means the horizon is too short.
    """
    band = n_sigma * math.hypot(first.std_error, second.std_error)
    return abs(first.value - second.value) > band
