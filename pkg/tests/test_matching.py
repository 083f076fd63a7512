import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import eb_dtms_eig, eb_fms_eig, eb_mmps_eig, invert
from qoslink import (
    ChannelSpec,
    DelaySpec,
    DtmsSource,
    FmsSource,
    InfeasibleError,
    MmpsSource,
    UnstableError,
    delay_violation,
    eb_dtms,
    eb_fms,
    eb_mmps,
    effective_bandwidth,
    effective_capacity,
    max_avg_rate,
    max_on_rate_dtms,
    max_on_rate_fms,
    max_on_rate_mmps,
    solve_qos_exponent,
)
from qoslink.matching import THETA_CAP

EC = 1.0573


def test_dtms_inversion_example():
    # Brent on the eigenvalue oracle: 2.3411268732999746
    assert max_on_rate_dtms(0.8, 0.2, EC, 1.0) == pytest.approx(2.3411268732999746, rel=1e-10)


def test_fms_inversion_example():
    # Brent on the eigenvalue oracle: 1.730043179829794
    assert max_on_rate_fms(0.2, 0.8, EC, 1.0) == pytest.approx(1.730043179829794, rel=1e-10)


def test_mmps_inversion_example():
    # Brent on the eigenvalue oracle: 1.0068448325390813
    assert max_on_rate_mmps(0.2, 0.8, EC, 1.0) == pytest.approx(1.0068448325390813, rel=1e-10)


def test_always_on_limits():
    for theta in (0.1, 1.0, 4.0):
        assert max_on_rate_dtms(0.0, 1.0, EC, theta) == pytest.approx(EC, rel=1e-12)
        assert max_on_rate_fms(1.0, 0.0, EC, theta) == pytest.approx(EC, rel=1e-12)
        assert max_on_rate_mmps(1.0, 0.0, EC, theta) == pytest.approx(theta * EC / math.expm1(theta), rel=1e-12)


@settings(max_examples=150)
@given(st.floats(0.0, 0.99), st.floats(0.0, 0.99), st.floats(0.01, 5.0), st.floats(1e-3, 5.0))
def test_dtms_matches_brute_force_inversion(p11, p22, ec, theta):
    got = max_on_rate_dtms(p11, p22, ec, theta)
    oracle = invert(lambda lam: eb_dtms_eig(p11, p22, lam, theta), ec, 1e-12, 700.0 / theta)
    assert got == pytest.approx(oracle, rel=1e-8)


@settings(max_examples=150)
@given(st.floats(0.01, 5.0), st.floats(0.01, 5.0), st.floats(0.01, 5.0), st.floats(1e-3, 5.0))
def test_ctmc_match_brute_force_inversion(alpha, beta, ec, theta):
    fms = invert(lambda lam: eb_fms_eig(alpha, beta, lam, theta), ec, 1e-12, 1e4)
    mmps = invert(lambda lam: eb_mmps_eig(alpha, beta, lam, theta), ec, 1e-12, 1e4)
    assert max_on_rate_fms(alpha, beta, ec, theta) == pytest.approx(fms, rel=1e-8)
    assert max_on_rate_mmps(alpha, beta, ec, theta) == pytest.approx(mmps, rel=1e-8)


def test_dtms_large_exponent_branch():
    lam = max_on_rate_dtms(0.3, 0.4, 800.0, 1.0)
    assert eb_dtms(DtmsSource(0.3, 0.4, lam), 1.0) == pytest.approx(800.0, rel=1e-12)


def test_infeasible_inputs():
    with pytest.raises(InfeasibleError):
        max_on_rate_dtms(1.0, 0.0, EC, 1.0)
    with pytest.raises(InfeasibleError):
        max_on_rate_fms(0.2, 0.8, 0.0, 1.0)


def test_max_avg_rate_composition():
    ch = ChannelSpec(10.0, 1.6906)
    ec = effective_capacity(ch, 1.0)
    got = max_avg_rate(DtmsSource(0.8, 0.2, 0.0), ch, 1.0)
    assert got == pytest.approx(0.2 * max_on_rate_dtms(0.8, 0.2, ec, 1.0), rel=1e-12)
    assert got == pytest.approx(0.4682, abs=1e-3)


def test_always_on_average_equals_capacity():
    ch = ChannelSpec(10.0, 1.6906)
    ec = effective_capacity(ch, 1.0)
    assert max_avg_rate(DtmsSource(0.0, 1.0, 1.0), ch, 1.0) == pytest.approx(ec, rel=1e-12)


def test_small_theta_average_is_mean_service():
    ch = ChannelSpec(10.0, 1.69)
    for src in (DtmsSource(0.5, 0.3, 1), FmsSource(0.3, 0.6, 1), MmpsSource(0.3, 0.6, 1)):
        assert max_avg_rate(src, ch, 1e-9) == pytest.approx(ch.mean_service, rel=1e-12)
        assert max_avg_rate(src, ch, 1e-5) == pytest.approx(ch.mean_service, rel=1e-3)


def test_p_on_family_nonincreasing():
    grid = np.linspace(0.05, 1.0, 20)
    lam = [max_on_rate_dtms(1 - p, p, EC, 1.0) for p in grid]
    assert np.all(np.diff(lam) <= 0)
    assert lam[-1] == pytest.approx(EC, rel=1e-12)


def test_source_ordering_on_fig5_grid():
    for ec in (0.3154, 1.0576, 2.1717):
        for p in np.linspace(0.05, 1.0, 20):
            d = max_on_rate_dtms(1 - p, p, ec, 1.0)
            f = max_on_rate_fms(p, 1 - p, ec, 1.0)
            m = max_on_rate_mmps(p, 1 - p, ec, 1.0)
            assert m <= f * (1 + 1e-12) and f <= d * (1 + 1e-12)


def _constructed():
    ch = ChannelSpec(10.0, 1.6906)
    lam = max_on_rate_dtms(0.8, 0.2, effective_capacity(ch, 1.0), 1.0)
    return DtmsSource(0.8, 0.2, lam), ch


def test_qos_exponent_constructed_example():
    src, ch = _constructed()
    op = solve_qos_exponent(src, ch)
    assert op.theta == pytest.approx(1.0, abs=1e-6)
    assert abs(op.effective_bandwidth - op.effective_capacity) <= 1e-9 * op.effective_capacity
    assert not op.capped


def test_qos_exponent_with_rounded_rate():
    # lambda rounded to 2.341 moves the crossing only slightly
    op = solve_qos_exponent(DtmsSource(0.8, 0.2, 2.341), ChannelSpec(10.0, 1.6906))
    assert op.theta == pytest.approx(1.0, abs=1e-3)


def test_lighter_load_gives_larger_exponent():
    src, ch = _constructed()
    lighter = DtmsSource(0.8, 0.2, 0.5 * src.lambda_on)
    theta = solve_qos_exponent(lighter, ch).theta
    assert theta > 1.0
    # bisection check of the crossing with the oracle effective bandwidth
    theta_oracle = invert(lambda t: eb_dtms_eig(0.8, 0.2, lighter.lambda_on, t) - effective_capacity(ch, t), 0.0, 1.0, 50.0)
    assert theta == pytest.approx(theta_oracle, rel=1e-6)


def test_unstable_source_rejected():
    ch = ChannelSpec(10.0, 1.6906)
    with pytest.raises(UnstableError, match="mean service"):
        solve_qos_exponent(DtmsSource(0.5, 0.5, 2 * ch.mean_service), ch)


def test_zero_rate_source_is_capped():
    op = solve_qos_exponent(FmsSource(0.3, 0.3, 0.0), ChannelSpec(10.0, 1.0))
    assert op.capped and op.theta == THETA_CAP


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["dtms", "fms", "mmps"]), st.floats(0.1, 0.9), st.floats(0.1, 0.9),
       st.floats(0.05, 0.95), st.floats(0.0, 20.0))
def test_qos_crossing_is_unique(kind, u, v, load, snr_db):
    snr = 10 ** (snr_db / 10)
    ch = ChannelSpec(snr, 0.8 * math.log2(1 + snr))
    if kind == "dtms":
        src = DtmsSource(u, v, 1.0)
    else:
        src = (FmsSource if kind == "fms" else MmpsSource)(u, v, 1.0)
    lam = load * ch.mean_service / src.p_on
    src = type(src)(*(getattr(src, f) for f in src.__dataclass_fields__ if f != "lambda_on"), lam)
    op = solve_qos_exponent(src, ch)
    if op.capped:
        return
    assert abs(op.effective_bandwidth - op.effective_capacity) <= 1e-9 * op.effective_capacity
    grid = np.concatenate([np.logspace(-5, math.log10(THETA_CAP), 200), [op.theta]])
    grid.sort()
    cap = np.array([effective_capacity(ch, t) for t in grid])
    gap = np.array([effective_bandwidth(src, t) for t in grid]) - cap
    # points within solver tolerance of the crossing carry no sign
    signs = np.sign(gap[np.abs(gap) > 1e-9 * cap])
    assert np.count_nonzero(np.diff(signs)) == 1


def test_delay_violation_examples():
    assert delay_violation(1.0, 1.0573, DelaySpec(5.0)) == pytest.approx(math.exp(-5.2865), rel=1e-12)
    assert delay_violation(1.0, 1.0573, DelaySpec(0.0, 0.4)) == pytest.approx(0.4)
    assert delay_violation(50.0, 20.0, DelaySpec(1e3)) == 0.0


def test_delay_violation_monotone_and_linear_in_zeta():
    base = delay_violation(1.0, 1.0, DelaySpec(3.0, 0.5))
    assert delay_violation(1.1, 1.0, DelaySpec(3.0, 0.5)) < base
    assert delay_violation(1.0, 1.1, DelaySpec(3.0, 0.5)) < base
    assert delay_violation(1.0, 1.0, DelaySpec(3.1, 0.5)) < base
    assert delay_violation(1.0, 1.0, DelaySpec(3.0, 0.25)) == pytest.approx(base / 2)


def test_delay_spec_validation():
    with pytest.raises(ValueError):
        DelaySpec(-1.0)
    with pytest.raises(ValueError):
        DelaySpec(1.0, 0.0)
