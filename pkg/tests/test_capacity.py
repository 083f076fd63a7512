import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import ec_quad, on_probability_quad
from qoslink import (
    ChannelSpec,
    SolverError,
    channel_on_probability,
    ec_rate_curvature,
    ec_rate_gradient,
    effective_capacity,
    optimal_rate,
)
from qoslink.capacity import rate_residual


def test_on_probability_example():
    # quadrature oracle: 0.8003895729239192
    assert channel_on_probability(ChannelSpec(10, 1.69)) == pytest.approx(0.8003895729239192, rel=1e-12)
    assert channel_on_probability(ChannelSpec(10, 0.0)) == 1.0
    assert channel_on_probability(ChannelSpec(1, 60.0)) < 1e-300


@settings(max_examples=50)
@given(st.floats(0.1, 1000), st.floats(0.0, 8.0))
def test_on_probability_matches_quadrature(snr, rate):
    assert channel_on_probability(ChannelSpec(snr, rate)) == pytest.approx(
        on_probability_quad(snr, rate), rel=1e-9, abs=1e-300
    )


def test_effective_capacity_example():
    # quadrature oracle: 1.057572279281674
    assert effective_capacity(ChannelSpec(10, 1.69), 1.0) == pytest.approx(1.057572279281674, rel=1e-12)


def test_zero_rate_serves_nothing():
    for theta in (1e-9, 0.3, 7.0):
        assert effective_capacity(ChannelSpec(4.0, 0.0), theta) == 0.0


def test_small_theta_is_ergodic_rate():
    ch = ChannelSpec(10, 1.69)
    assert effective_capacity(ch, 1e-9) == pytest.approx(0.8003895729239192 * 1.69, rel=1e-12)
    assert effective_capacity(ch, 2e-6) == pytest.approx(0.8003895729239192 * 1.69, rel=1e-5)


@settings(max_examples=100)
@given(st.floats(0.1, 1000), st.floats(0.01, 8.0), st.floats(1e-3, 20.0))
def test_matches_quadrature_and_bounds(snr, rate, theta):
    ch = ChannelSpec(snr, rate)
    ec = effective_capacity(ch, theta)
    assert ec == pytest.approx(ec_quad(snr, rate, theta), rel=1e-8, abs=1e-300)
    assert 0.0 <= ec <= rate
    assert ec <= ch.on_probability * rate * (1 + 1e-12)


def test_nonincreasing_in_theta_and_vanishing():
    ch = ChannelSpec(10, 2.0)
    grid = np.logspace(-4, 3, 100)
    values = [effective_capacity(ch, t) for t in grid]
    assert np.all(np.diff(values) <= 1e-15)
    # large theta: C_E ~ -ln(1 - p_on) / theta
    assert values[-1] == pytest.approx(-math.log1p(-ch.on_probability) / 1e3, rel=1e-6)


@settings(max_examples=100)
@given(st.floats(0.5, 200), st.floats(0.05, 8.0), st.floats(0.05, 10.0))
def test_gradient_matches_finite_differences(snr, rate, theta):
    # step scaled to the fastest local exponential rate
    h = 1e-4 / (theta + math.log(2) * 2**rate / snr + 1.0)
    up = effective_capacity(ChannelSpec(snr, rate + h), theta)
    down = effective_capacity(ChannelSpec(snr, rate - h), theta)
    fd = (up - down) / (2 * h)
    g = ec_rate_gradient(ChannelSpec(snr, rate), theta)
    scale = max(abs(g), effective_capacity(ChannelSpec(snr, rate), theta) * 1e-3, 1e-300)
    assert abs(g - fd) <= 1e-6 * scale


def test_gradient_signs_around_optimum():
    opt = optimal_rate(10.0, 1.0)
    assert abs(ec_rate_gradient(ChannelSpec(10, opt.r_star), 1.0)) < 1e-8
    assert ec_rate_gradient(ChannelSpec(10, 0.5), 1.0) > 0
    assert ec_rate_gradient(ChannelSpec(10, 5.0), 1.0) < 0


def test_curvature_negative_near_optimum():
    r_star = optimal_rate(10.0, 1.0).r_star
    for r in (1.69, r_star - 0.3, r_star, r_star + 0.3):
        assert ec_rate_curvature(ChannelSpec(10, r), 1.0, 1e-3) < 0


def test_curvature_consistent_with_gradient():
    h = 1e-3
    for r in (1.0, 1.69, 2.2):
        c = ec_rate_curvature(ChannelSpec(10, r), 1.0, h)
        g = (ec_rate_gradient(ChannelSpec(10, r + h), 1.0) - ec_rate_gradient(ChannelSpec(10, r - h), 1.0)) / (2 * h)
        assert c == pytest.approx(g, rel=1e-4)


def test_curvature_step_validation():
    with pytest.raises(ArithmeticError, match="rounding"):
        ec_rate_curvature(ChannelSpec(10, 1.69), 1.0, 1e-7)
    with pytest.raises(ValueError):
        ec_rate_curvature(ChannelSpec(10, 0.5), 1.0, 1.0)


def test_optimal_rate_examples():
    # Brent maximization of the quadrature oracle: r* = 1.69607589..., C_E* = 1.057587241253762
    opt = optimal_rate(10.0, 1.0)
    assert opt.r_star == pytest.approx(1.6960758957, abs=1e-8)
    assert opt.ec_star == pytest.approx(1.057587241253762, rel=1e-10)
    assert opt.residual <= 1e-10
    # 0 dB: r* = 0.65151151...
    assert optimal_rate(1.0, 1.0).r_star == pytest.approx(0.6515115184, abs=1e-8)


def test_optimal_rate_ergodic_limit():
    # bounded Brent on p_on(r) * r: argmax 2.518264595440194
    opt = optimal_rate(10.0, 1e-9)
    assert opt.r_star == pytest.approx(2.518264595440194, abs=1e-7)
    assert opt.ec_star == pytest.approx(1.5693750052834643, rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 1e4), st.floats(1e-3, 30.0))
def test_optimum_beats_grid_and_satisfies_fixed_point(snr, theta):
    opt = optimal_rate(snr, theta)
    rhs = math.log1p(snr * theta / (2**opt.r_star * math.log(2))) / theta
    assert abs(opt.r_star - rhs) <= 1e-10
    grid = np.linspace(1e-3, 2 * opt.r_star + 1, 400)
    best = max(effective_capacity(ChannelSpec(snr, r), theta) for r in grid)
    assert opt.ec_star >= best * (1 - 1e-12)


def _damped_fixed_point(snr, theta, damping=0.3, tol=1e-12):
    r = 1.0
    for _ in range(100_000):
        nxt = math.log1p(snr * theta / (2**r * math.log(2))) / theta
        if abs(nxt - r) < tol:
            return nxt
        r = (1 - damping) * r + damping * nxt
    raise AssertionError("damped iteration did not converge")


@pytest.mark.parametrize("snr,theta", [(10, 1), (1, 1), (100, 0.1), (100, 10), (0.5, 3)])
def test_bisection_agrees_with_damped_iteration(snr, theta):
    assert optimal_rate(snr, theta).r_star == pytest.approx(_damped_fixed_point(snr, theta), abs=1e-9)


def test_residual_monotone_with_negative_origin():
    for snr, theta in [(10, 1), (1, 0.1), (100, 10)]:
        rs = np.linspace(0, 10, 500)
        g = [rate_residual(r, snr, theta) for r in rs]
        assert g[0] < 0
        assert np.all(np.diff(g) > 0)


def test_solver_reports_bracket_on_failure(monkeypatch):
    import qoslink.capacity as cap

    monkeypatch.setattr(cap, "MAX_ITERATIONS", 3)
    with pytest.raises(SolverError) as info:
        cap.optimal_rate(10.0, 1.0)
    lo, hi = info.value.bracket
    assert lo < 1.696 < hi
