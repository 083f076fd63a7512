"""
JSON run configuration.

One document with the sections ``source``, ``channel``, ``qos``, ``delay``,
``sweep`` and ``sim``; unknown keys are rejected so that unit mistakes
(``snr`` instead of ``snr_db``, say) fail early. Example::

    {
      "source":  {"model": "dtms", "p_on": 0.2, "lambda_on": 2.341},
      "channel": {"snr_db": 10, "rate": 1.6906},
      "qos":     {"theta": 1.0},
      "delay":   {"d": [5, 10], "zeta": 1.0},
      "sim":     {"n_blocks": 2000000, "seed": 7}
    }

``source``: ``model`` is ``dtms`` (with ``p11``/``p22``) or ``fms``/``mmps``
(with ``alpha``/``beta``); either may instead give ``p_on``, which selects
the memoryless DTMS chain or ``alpha + beta = 1``. ``lambda_on`` is optional
for ``analyze``: when absent the source is taken at its maximum ON rate.

``channel``: ``snr_db`` (required) and ``rate`` in bits/block (optional,
defaults to the capacity-maximizing rate for ``qos.theta``).

``delay.zeta`` is a number in (0, 1] or ``"simulate"`` to use the simulated
non-empty-buffer fraction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

from .core import ChannelSpec, DtmsSource, FmsSource, MmpsSource, SourceModel, db_to_linear
from .sweeps import SweepOptions

SECTIONS = ("source", "channel", "qos", "delay", "sweep", "sim")

_SOURCE_KEYS = {
    "dtms": {"model", "p11", "p22", "p_on", "lambda_on"},
    "fms": {"model", "alpha", "beta", "p_on", "lambda_on"},
    "mmps": {"model", "alpha", "beta", "p_on", "lambda_on"},
}
_CHANNEL_KEYS = {"snr_db", "rate"}
_QOS_KEYS = {"theta"}
_DELAY_KEYS = {"d", "zeta"}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists ``section.field: message`` strings."""

    def __init__(self, errors: List[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class SimSettings:
    n_blocks: int = 2_000_000
    warmup_blocks: int = 1_000
    n_replications: int = 1
    seed: int = 0
    blowup_bound: float = 1e3
    # estimator batch: horizon in blocks and number of independent paths
    horizon: int = 10
    paths: int = 100_000
    tail_d_min: int = 5
    tail_d_max: int = 25
    min_tail_events: int = 100
    tail_rtol: float = 0.15
    n_sigma: float = 3.0


@dataclass
class RunConfig:
    source: Optional[SourceModel] = None
    source_has_rate: bool = False
    snr_db: Optional[float] = None
    rate: Optional[float] = None
    theta: Optional[float] = None
    delays: List[float] = field(default_factory=list)
    zeta: Union[float, str] = 1.0
    sweep: SweepOptions = field(default_factory=SweepOptions)
    sim: SimSettings = field(default_factory=SimSettings)

    @property
    def snr(self) -> float:
        return db_to_linear(self.snr_db)

    def channel(self, rate: float) -> ChannelSpec:
        return ChannelSpec(self.snr, rate)


def _number(errors, where, value, *, positive=False, nonneg=False, unit=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"{where}: expected a number, got {value!r}")
        return None
    if integer and not float(value).is_integer():
        errors.append(f"{where}: expected an integer, got {value!r}")
        return None
    value = int(value) if integer else float(value)
    if not math.isfinite(value):
        errors.append(f"{where}: must be finite")
    elif positive and not value > 0:
        errors.append(f"{where}: must be positive, got {value}")
    elif nonneg and value < 0:
        errors.append(f"{where}: must be non-negative, got {value}")
    elif unit and not 0 <= value <= 1:
        errors.append(f"{where}: must lie in [0, 1], got {value}")
    else:
        return value
    return None


def _unknown(errors, section, data, allowed):
    for key in sorted(set(data) - set(allowed)):
        errors.append(f"{section}.{key}: unknown key")


def _parse_source(errors, data) -> Tuple[Optional[SourceModel], bool]:
    if not isinstance(data, dict):
        errors.append("source: expected an object")
        return None, False
    model = data.get("model")
    if model not in _SOURCE_KEYS:
        errors.append(f"source.model: expected one of dtms, fms, mmps, got {model!r}")
        return None, False
    _unknown(errors, "source", data, _SOURCE_KEYS[model])
    has_rate = "lambda_on" in data
    lam = _number(errors, "source.lambda_on", data["lambda_on"], nonneg=True) if has_rate else 0.0
    pair = ("p11", "p22") if model == "dtms" else ("alpha", "beta")
    if "p_on" in data:
        if any(k in data for k in pair):
            errors.append(f"source.p_on: give either p_on or {pair[0]}/{pair[1]}, not both")
            return None, has_rate
        p_on = _number(errors, "source.p_on", data["p_on"], unit=True)
        if p_on is None or lam is None:
            return None, has_rate
        if model != "dtms" and not 0 < p_on < 1:
            errors.append("source.p_on: must lie strictly inside (0, 1) for fms/mmps")
            return None, has_rate
        try:
            if model == "dtms":
                return DtmsSource.memoryless(p_on, lam), has_rate
            cls = FmsSource if model == "fms" else MmpsSource
            return cls.from_p_on(p_on, lam), has_rate
        except ValueError as exc:
            errors.append(f"source: {exc}")
            return None, has_rate
    missing = [k for k in pair if k not in data]
    if missing:
        errors.append(f"source: missing {', '.join(missing)} (or give p_on)")
        return None, has_rate
    if model == "dtms":
        values = [_number(errors, f"source.{k}", data[k], unit=True) for k in pair]
    else:
        values = [_number(errors, f"source.{k}", data[k], positive=True) for k in pair]
    if None in values or lam is None:
        return None, has_rate
    try:
        cls = {"dtms": DtmsSource, "fms": FmsSource, "mmps": MmpsSource}[model]
        return cls(values[0], values[1], lam), has_rate
    except ValueError as exc:
        errors.append(f"source: {exc}")
        return None, has_rate


def _parse_dataclass(errors, section, data, cls):
    if not isinstance(data, dict):
        errors.append(f"{section}: expected an object")
        return cls()
    names = cls.field_names() if hasattr(cls, "field_names") else list(cls.__dataclass_fields__)
    _unknown(errors, section, data, names)
    defaults = cls()
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            continue
        default = getattr(defaults, key)
        where = f"{section}.{key}"
        if isinstance(default, tuple):
            if not isinstance(value, list) or not value:
                errors.append(f"{where}: expected a non-empty list of numbers")
                continue
            items = [_number(errors, where, v) for v in value]
            if None not in items:
                kwargs[key] = tuple(items)
        elif isinstance(default, int) and not isinstance(default, bool):
            v = _number(errors, where, value, integer=True, nonneg=True)
            if v is not None:
                kwargs[key] = v
        else:
            v = _number(errors, where, value)
            if v is not None:
                kwargs[key] = v
    try:
        return cls(**kwargs)
    except ValueError as exc:
        errors.append(f"{section}: {exc}")
        return defaults


def parse_config(doc: Dict[str, Any]) -> RunConfig:
    """Validate a decoded JSON document.

    Raises:
        ConfigError: listing every field-level problem found.
    """
    errors: List[str] = []
    if not isinstance(doc, dict):
        raise ConfigError(["config: top level must be a JSON object"])
    _unknown(errors, "config", doc, SECTIONS)
    cfg = RunConfig()

    if "source" in doc:
        cfg.source, cfg.source_has_rate = _parse_source(errors, doc["source"])

    channel = doc.get("channel", {})
    if not isinstance(channel, dict):
        errors.append("channel: expected an object")
    else:
        _unknown(errors, "channel", channel, _CHANNEL_KEYS)
        if "snr_db" in channel:
            cfg.snr_db = _number(errors, "channel.snr_db", channel["snr_db"])
        if "rate" in channel:
            cfg.rate = _number(errors, "channel.rate", channel["rate"], nonneg=True)

    qos = doc.get("qos", {})
    if not isinstance(qos, dict):
        errors.append("qos: expected an object")
    else:
        _unknown(errors, "qos", qos, _QOS_KEYS)
        if "theta" in qos:
            cfg.theta = _number(errors, "qos.theta", qos["theta"], positive=True)

    delay = doc.get("delay", {})
    if not isinstance(delay, dict):
        errors.append("delay: expected an object")
    else:
        _unknown(errors, "delay", delay, _DELAY_KEYS)
        d = delay.get("d", [])
        d = d if isinstance(d, list) else [d]
        cfg.delays = [v for v in (_number(errors, "delay.d", x, nonneg=True) for x in d) if v is not None]
        zeta = delay.get("zeta", 1.0)
        if zeta == "simulate":
            cfg.zeta = zeta
        else:
            z = _number(errors, "delay.zeta", zeta, positive=True)
            if z is not None and z > 1:
                errors.append(f"delay.zeta: must lie in (0, 1] or be \"simulate\", got {z}")
            elif z is not None:
                cfg.zeta = z

    if "sweep" in doc:
        cfg.sweep = _parse_dataclass(errors, "sweep", doc["sweep"], SweepOptions)
    if "sim" in doc:
        cfg.sim = _parse_dataclass(errors, "sim", doc["sim"], SimSettings)
        if cfg.sim.n_blocks < 1 or cfg.sim.horizon < 1 or cfg.sim.paths < 2:
            errors.append("sim: n_blocks and horizon must be >= 1 and paths >= 2")
        if not cfg.sim.warmup_blocks < cfg.sim.n_blocks:
            errors.append("sim.warmup_blocks: must be below n_blocks")

    if errors:
        raise ConfigError(errors)
    return cfg


def require(cfg: RunConfig, *names: str) -> None:
    """Raise ``ConfigError`` naming each required setting that is missing."""
    where = {"source": "source", "snr_db": "channel.snr_db", "theta": "qos.theta"}
    missing = [f"{where[n]}: required" for n in names if getattr(cfg, n) is None]
    if missing:
        raise ConfigError(missing)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc.strerror}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: invalid JSON at line {exc.lineno}: {exc.msg}"]) from exc
    return parse_config(doc)
