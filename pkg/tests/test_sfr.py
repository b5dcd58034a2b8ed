import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal

from mgresilience.case import VscDynamics
from mgresilience.sfr import (
    Regime,
    SfrAggregate,
    aggregate,
    component_coefficients,
    nadir,
    settling_time,
    shape,
    simulate_piecewise,
    simulate_step,
    steady_state,
    step_response,
)

UNIT = VscDynamics(H=0.9, R=0.08, T=0.008, T_prime=0.1)
FOUR = SfrAggregate(H_a=3.6, D=1.0, inv_R_a=50.0, K_a=0.4, T_prime=0.1)

# frozen from scipy.signal: poles of the denominator and a 1 us step-response grid
FOUR_WN = 8.416254115301731
FOUR_XI = 0.6353446734100324
FOUR_ALPHA = 0.02218936289272658
FOUR_TN = 0.337285
ONE_ALPHA = 0.08379644168332814
TWO_ALPHA = 0.04352071805512247


def _lti(agg: SfrAggregate) -> signal.lti:
    tp = agg.T_prime
    return signal.lti([tp, 1.0], [2 * agg.H_a * tp, 2 * agg.H_a + tp * agg.D + agg.K_a, agg.D + agg.inv_R_a])


def test_aggregate_single_and_four():
    one = aggregate([UNIT], 1.0)
    assert (one.H_a, one.inv_R_a, one.K_a, one.T_prime) == pytest.approx((0.9, 12.5, 0.1, 0.1))
    four = aggregate([UNIT] * 4, 1.0)
    assert (four.H_a, four.inv_R_a, four.K_a) == pytest.approx((3.6, 50.0, 0.4))
    assert four.D == 1.0


def test_aggregate_errors():
    with pytest.raises(ValueError):
        aggregate([], 1.0)
    with pytest.raises(ValueError):
        aggregate([UNIT, VscDynamics(0.9, 0.08, 0.008, 0.2)], 1.0)
    with pytest.raises(ValueError):
        # T' - K_a R_a = 0.1 - 0.2 < 0
        aggregate([VscDynamics(0.9, 0.08, 0.2, 0.1)], 1.0)


def test_shape_four():
    sh = shape(FOUR)
    assert sh.omega_n == pytest.approx(FOUR_WN, rel=1e-12)
    assert sh.xi == pytest.approx(FOUR_XI, rel=1e-12)
    assert sh.regime is Regime.UNDER
    assert sh.omega_r == pytest.approx(FOUR_WN * math.sqrt(1 - FOUR_XI**2))


def test_shape_critical_by_construction():
    # solve xi(H) = 1 for H with the other constants fixed
    D, iR, K, tp = 1.0, 12.5, 0.1, 0.1
    k = D + iR
    # (2H + tp D + K)^2 = 4 * 2 H tp k  ->  quadratic in H
    a, b, c = 4.0, 4.0 * (tp * D + K) - 8.0 * tp * k, (tp * D + K) ** 2
    H = (-b + math.sqrt(b * b - 4 * a * c)) / (2 * a)
    agg = SfrAggregate(H, D, iR, K, tp)
    assert shape(agg).regime is Regime.CRITICAL
    m = nadir(agg)
    assert m.d_omega_nadir_unit == pytest.approx(m.d_omega_ss_unit)


def test_shape_zero_damping():
    agg = SfrAggregate(0.9, 0.0, 12.5, 0.1, 0.1)
    sh = shape(agg)
    roots = np.roots([2 * 0.9 * 0.1, 2 * 0.9 + 0.1, 12.5])
    assert sh.omega_n == pytest.approx(math.sqrt(np.prod(roots).real))
    assert sh.xi == pytest.approx(-roots[0].real / sh.omega_n)


def test_steady_state_values():
    assert steady_state(FOUR, 0.0) == 0.0
    assert steady_state(FOUR, 1.0) == pytest.approx(1 / 51)
    assert steady_state(FOUR, 0.095) == pytest.approx(0.0018627, abs=1e-7)
    assert steady_state(FOUR, 0.095) * 50 == pytest.approx(0.0931, abs=1e-4)
    assert steady_state(FOUR, 3 * 0.2) == pytest.approx(3 * steady_state(FOUR, 0.2), rel=1e-15)


def test_nadir_four():
    m = nadir(FOUR)
    assert m.d_omega_nadir_unit == pytest.approx(FOUR_ALPHA, abs=1e-9)
    assert m.t_nadir == pytest.approx(FOUR_TN, abs=2e-6)
    assert m.d_omega_ss_unit == pytest.approx(1 / 51)


def test_nadir_overdamped_large_damping():
    # poles at about -37.2 and -93.4, lead zero at -100: no overshoot
    agg = SfrAggregate(0.9, 50.0, 12.5, 0.05, 0.01)
    assert shape(agg).regime is Regime.OVER
    m = nadir(agg)
    assert m.d_omega_nadir_unit == m.d_omega_ss_unit
    assert m.t_nadir is None


def test_nadir_overdamped_with_overshoot():
    # over-damped, but the lead zero (-10) is slower than the dominant pole: the
    # response overshoots, so the peak exceeds the steady state
    agg = SfrAggregate(0.9, 200.0, 12.5, 0.1, 0.1)
    assert shape(agg).regime is Regime.OVER
    t = np.linspace(0, 1, 200001)
    _, y = signal.step(_lti(agg), T=t)
    m = nadir(agg)
    assert m.d_omega_nadir_unit == pytest.approx(y.max(), abs=1e-9)
    assert m.d_omega_nadir_unit > m.d_omega_ss_unit


def test_nadir_middle_branch():
    # choose D so that xi * wn * T' = 1, i.e. (2H + T'D + K) / (4H) = 1
    H, iR, K, tp = 0.9, 12.5, 0.1, 0.1
    D = (4 * H - 2 * H - K) / tp
    agg = SfrAggregate(H, D, iR, K, tp)
    sh = shape(agg)
    assert sh.xi * sh.omega_n * tp == pytest.approx(1.0, abs=1e-12)
    assert nadir(agg).t_nadir == pytest.approx(math.pi / (2 * sh.omega_r))


def test_branch_continuity():
    H, iR, K, tp = 0.9, 12.5, 0.1, 0.1
    D0 = (2 * H - K) / tp
    below = nadir(SfrAggregate(H, D0 - 1e-9, iR, K, tp))
    above = nadir(SfrAggregate(H, D0 + 1e-9, iR, K, tp))
    assert abs(below.t_nadir - above.t_nadir) < 1e-6
    assert abs(below.d_omega_nadir_unit - above.d_omega_nadir_unit) < 1e-9


def test_component_coefficients(bundled):
    alpha, beta = component_coefficients(bundled, bundled.mg_ids)
    assert alpha == pytest.approx(FOUR_ALPHA, abs=1e-9)
    assert beta == pytest.approx(1 / 51)
    a1, b1 = component_coefficients(bundled, ["m2"])
    assert a1 == pytest.approx(ONE_ALPHA, abs=1e-9)
    assert b1 == pytest.approx(1 / 13.5)
    assert component_coefficients(bundled, ["m1", "m2"]) == component_coefficients(bundled, ["m3", "m4"])
    assert component_coefficients(bundled, ["m1", "m2"])[0] == pytest.approx(TWO_ALPHA, abs=1e-9)
    with pytest.raises(KeyError):
        component_coefficients(bundled, ["m9"])


def test_step_response_matches_scipy():
    t = np.linspace(0, 2, 401)
    _, y = signal.step(_lti(FOUR), T=t)
    assert np.max(np.abs(step_response(FOUR, t) - y)) < 1e-10
    over = SfrAggregate(0.9, 200.0, 12.5, 0.1, 0.1)
    _, y = signal.step(_lti(over), T=t)
    assert np.max(np.abs(step_response(over, t) - y)) < 1e-10


def test_simulate_step_zero():
    traj = simulate_step(FOUR, 0.0, 1.0, 1e-3)
    assert not np.any(traj.d_omega)


def test_simulate_step_matches_closed_form():
    traj = simulate_step(FOUR, 1.0, settling_time(FOUR, 12.0), 1e-4)
    assert traj.extremum == pytest.approx(FOUR_ALPHA, abs=1e-6)
    assert traj.t_extremum == pytest.approx(FOUR_TN, abs=1e-4)
    assert traj.d_omega[-1] == pytest.approx(1 / 51, abs=1e-6)
    neg = simulate_step(FOUR, -0.64, 2.0, 1e-4)
    assert neg.extremum == pytest.approx(-0.64 * FOUR_ALPHA, abs=1e-6)


def test_simulate_piecewise_continuity():
    # a step split into two identical segments equals the plain step
    a = simulate_step(FOUR, 0.5, 1.0, 1e-3)
    b = simulate_piecewise(FOUR, [(0.0, 0.5), (0.4, 0.5)], 1.0, 1e-3)
    assert np.allclose(a.d_omega, b.d_omega, atol=1e-14)
    with pytest.raises(ValueError):
        simulate_piecewise(FOUR, [(0.1, 0.5)], 1.0, 1e-3)
    with pytest.raises(ValueError):
        simulate_step(FOUR, float("nan"), 1.0, 1e-3)


def test_invalid_aggregate():
    with pytest.raises(ValueError):
        SfrAggregate(float("inf"), 1, 1, 0.1, 0.1)
    with pytest.raises(ValueError):
        SfrAggregate(1.0, -1.0, 12.5, 0.1, 0.1)


params = st.tuples(
    st.floats(0.2, 5.0), st.floats(0.0, 5.0), st.floats(2.0, 60.0), st.floats(0.0, 0.9), st.floats(0.05, 0.5)
)


@settings(max_examples=80, deadline=None)
@given(params)
def test_alpha_not_below_beta(p):
    H, D, iR, kfrac, tp = p
    agg = SfrAggregate(H, D, iR, kfrac * tp * iR, tp)
    m = nadir(agg)
    assert m.d_omega_nadir_unit >= m.d_omega_ss_unit * (1 - 1e-12)
    sh = shape(agg)
    if sh.regime is Regime.UNDER and kfrac < 1:
        # strict only when the overshoot survives double precision
        if math.exp(-sh.xi * math.pi / math.sqrt(1 - sh.xi**2)) > 1e-10:
            assert m.d_omega_nadir_unit > m.d_omega_ss_unit


@settings(max_examples=40, deadline=None)
@given(params, st.floats(-2.0, 2.0))
def test_closed_form_matches_scipy_peak(p, dp):
    H, D, iR, kfrac, tp = p
    agg = SfrAggregate(H, D, iR, kfrac * tp * iR, tp)
    t = np.linspace(0.0, settling_time(agg, 25.0), 40001)
    _, y = signal.step(_lti(agg), T=t)
    alpha = nadir(agg).d_omega_nadir_unit
    assert abs(alpha - max(y.max(), y[-1])) < 1e-5 * max(1.0, alpha)
    assert steady_state(agg, dp) == pytest.approx(dp * nadir(agg).d_omega_ss_unit)
