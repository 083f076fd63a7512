"""QoS-constrained throughput of a fixed-rate Rayleigh link fed by Markov sources."""

from .bandwidth import eb_dtms, eb_fms, eb_mmps, effective_bandwidth
from .capacity import (
    RateOptimum,
    channel_on_probability,
    ec_rate_curvature,
    ec_rate_gradient,
    effective_capacity,
    optimal_rate,
)
from .core import (
    SMALL_THETA,
    ChannelSpec,
    DtmsSource,
    FmsSource,
    InfeasibleError,
    MmpsSource,
    QosError,
    SolverError,
    SourceModel,
    UnstableError,
    db_to_linear,
    linear_to_db,
    steady_state,
)
from .matching import (
    DelaySpec,
    OperatingPoint,
    delay_violation,
    max_avg_rate,
    max_on_rate,
    max_on_rate_dtms,
    max_on_rate_fms,
    max_on_rate_mmps,
    solve_qos_exponent,
)

__version__ = "0.1.0"
