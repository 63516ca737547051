import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqaxx.model import build_problem
from sqaxx.schedule import (
    AnnealBase,
    Constant,
    FrozenSchedule,
    InverseLog,
    PropConstants,
    ScheduleError,
    SchedulePolicy,
    Tabulated,
    fd_step,
    standard_policy,
    trajectory_sign_free,
    validate,
)
from sqaxx.trotter import coefficients, reduced_params, sign_free


def test_gamma_example():
    # b = 1, M = beta and c3 t + c4 = e  ->  Gamma = atanh(e^-0.125)
    policy = SchedulePolicy(c3=1.0, c4=math.e, g=0.125, h=0.5)
    p = policy.params_at(AnnealBase(3.0, 3, 1), 0.0)
    assert p.gamma == pytest.approx(1.387, abs=5e-4)
    assert p.gamma == pytest.approx(0.5 * math.log(1.8825 / 0.1175), abs=2e-3)


def test_half_log_coth_identities():
    policy = SchedulePolicy(c3=2.0, c4=3.0, g=0.1, h=0.4)
    base = AnnealBase(2.0, 8, 3)
    for t in (0.0, 5.0, 1e4, 1e8):
        co = coefficients(policy.params_at(base, t), base.degree)
        x = 2.0 * t + 3.0
        assert co.c1 == pytest.approx(0.05 * math.log(x), rel=1e-9)
        assert co.d2 == pytest.approx(0.2 * math.log(x), rel=1e-9)


def test_literal_form_drops_degree():
    with_b = SchedulePolicy(c3=1.0, c4=2.0, g=0.1, h=0.4)
    without_b = SchedulePolicy(c3=1.0, c4=2.0, g=0.1, h=0.4, include_degree=False)
    base = AnnealBase(1.0, 4, 2)
    assert with_b.params_at(base, 10.0).gamma == pytest.approx(2 * without_b.params_at(base, 10.0).gamma)


def test_ramp_starts_without_catalyst():
    policy = SchedulePolicy(c3=1.0, c4=2.0, g=0.125, h=0.5, gamma0=5.0)
    base = AnnealBase(1.0, 4, 2)
    ts = policy.switch_time(base)
    assert ts > 0
    p0 = policy.params_at(base, 0.0)
    assert p0.kappa == 0.0 and p0.gamma == 5.0
    # Gamma is continuous at the switch
    assert policy.params_at(base, ts * (1 - 1e-9)).gamma == pytest.approx(policy.params_at(base, ts).gamma, rel=1e-6)
    assert policy.params_at(base, ts).gamma == pytest.approx(5.0, rel=1e-9)


def test_catalyst_vanishes_monotonically():
    policy = standard_policy(4)
    base = AnnealBase(1.0, 4, 2)
    ks = [policy.params_at(base, t).kappa for t in np.logspace(0, 12, 25)]
    assert all(b < a for a, b in zip(ks, ks[1:]))
    assert ks[-1] < 1e-5


def test_domain_errors():
    with pytest.raises(ScheduleError):
        SchedulePolicy(c3=1.0, c4=1.0, g=0.1)
    with pytest.raises(ScheduleError):
        SchedulePolicy(c3=0.0, c4=2.0, g=0.1)
    with pytest.raises(ScheduleError):
        standard_policy(4).params_at(AnnealBase(1.0, 4, 2), -1.0)
    with pytest.raises(ScheduleError):
        SchedulePolicy(c3=1.0, c4=2.0, g=-0.1).params_at(AnnealBase(1.0, 4, 2), 1.0)


def test_fd_step_rule():
    policy = standard_policy(4)
    assert fd_step(policy, 1e6) == pytest.approx(1e-3 * (1e6 + 2.0))
    assert fd_step(SchedulePolicy(c3=1e9, c4=1.5, g=0.1), 0.0) == 1e-6


def test_policy_json_round_trip():
    policy = SchedulePolicy(
        c3=1.5, c4=2.5, g={"t": [0, 10, 100, 1000], "values": [0.1, 0.11, 0.12, 0.125]},
        h=InverseLog(0.5, 0.1), t_switch=3.0, gamma0=8.0, prop_constants=PropConstants(1e-2, 1e-3, 1e-4, 1e-5),
    )
    again = SchedulePolicy.from_json(json.loads(json.dumps(policy.to_json())))
    assert again.to_json() == policy.to_json()


def test_policy_json_rejects_unknown_keys():
    with pytest.raises(ScheduleError):
        SchedulePolicy.from_json({"c3": 1, "c4": 2, "g": 0.1, "gamma_0": 3})


# ---------------------------------------------------------------- exponent functions


def test_tabulated_reproduces_samples_and_holds_tail():
    f = Tabulated([0, 10, 100, 1000, 1e4], [0.2, 0.15, 0.13, 0.126, 0.125])
    np.testing.assert_allclose(f(np.array([0, 10, 100, 1000, 1e4])), [0.2, 0.15, 0.13, 0.126, 0.125], rtol=1e-12)
    assert f(1e9) == pytest.approx(0.125)
    assert f.d1(1e9) == 0.0 and f.d2(1e9) == 0.0


@given(st.floats(1.0, 5e3))
def test_tabulated_derivatives_match_finite_differences(t):
    f = Tabulated([0, 10, 100, 1000, 1e4], [0.2, 0.15, 0.13, 0.126, 0.125])
    h = 1e-4 * (1 + t)
    assert f.d1(t) == pytest.approx((f(t + h) - f(t - h)) / (2 * h), rel=1e-4, abs=1e-12)
    assert f.d2(t) == pytest.approx((f.d1(t + h) - f.d1(t - h)) / (2 * h), rel=1e-3, abs=1e-12)


@given(st.floats(1.0, 1e9))
def test_inverse_log_derivatives(t):
    f = InverseLog(0.5, 0.1, c3=2.0, c4=3.0)
    h = 1e-4 * (t + 1.5)
    assert f.d1(t) == pytest.approx((f(t + h) - f(t - h)) / (2 * h), rel=1e-5)
    assert f.d2(t) == pytest.approx((f.d1(t + h) - f.d1(t - h)) / (2 * h), rel=1e-4)


def test_tabulated_needs_samples():
    with pytest.raises(ScheduleError):
        Tabulated([0, 1], [0.1, 0.2])
    with pytest.raises(ScheduleError):
        Tabulated([0, 2, 1, 3], [0.1, 0.2, 0.3, 0.4])


# ---------------------------------------------------------------- validation


@pytest.mark.parametrize("n", [2, 4, 8])
def test_standard_policy_passes_everything(n):
    report = validate(standard_policy(n), n)
    assert report.passed, report.failed
    assert len(report.conditions) == 9


def test_h_equal_2g_fails_only_47():
    n = 4
    report = validate(SchedulePolicy(c3=1.0, c4=2.0, g=1 / (2 * n), h=1 / n), n)
    assert report.failed_conditions == ["h_2g_limit"]
    assert not report.condition("strict_sign_free").passed


def test_g_too_large_with_standard_h_breaks_two_conditions():
    # with h = 2/N kept, g = 1/N also makes h - 2g = 0
    n = 4
    report = validate(SchedulePolicy(c3=1.0, c4=2.0, g=1 / n, h=2 / n), n)
    assert report.failed_conditions == ["h_2g_limit", "g_range"]


def test_g_too_large_isolated():
    n = 4
    report = validate(SchedulePolicy(c3=1.0, c4=2.0, g=1 / n, h=3 / n), n)
    assert report.failed_conditions == ["g_range"]


@given(st.integers(2, 12), st.floats(1.0001, 1.9))
def test_g_above_boundary_flips_exactly_48(n, factor):
    g = factor / (2 * n)
    report = validate(SchedulePolicy(c3=1.0, c4=2.0, g=g, h=2 / n), n)
    assert report.failed_conditions == ["g_range"]


def test_h_prime_above_d_prime_fails_only_51():
    n = 4
    policy = SchedulePolicy(
        c3=1.0, c4=2.0, g=1 / (2 * n), h=InverseLog(2 / n, 0.1), prop_constants=PropConstants(d_prime=1e-10)
    )
    report = validate(policy, n)
    assert report.failed_conditions == ["h_d1_bound"]


def test_g_derivative_bound_detects_fast_drift():
    n = 4
    policy = SchedulePolicy(c3=1.0, c4=2.0, g=InverseLog(1 / (4 * n), 0.05), h=2 / n,
                            prop_constants=PropConstants(c_prime=1e-6))
    assert "g_d1_bound" in validate(policy, n).failed_conditions


def test_h_growing_linearly_fails_limit():
    from sqaxx.schedule import Analytic

    h = Analytic(lambda t: 1.0 + 0.5 * np.asarray(t, dtype=float), lambda t: 0.5 + 0 * np.asarray(t, dtype=float),
                 lambda t: 0 * np.asarray(t, dtype=float))
    report = validate(SchedulePolicy(c3=1.0, c4=2.0, g=0.1, h=h, prop_constants=PropConstants(d_prime=1.0)), 4)
    assert "h_over_x_limit" in report.failed_conditions


def test_no_catalyst_policy_passes():
    assert validate(SchedulePolicy(c3=1.0, c4=2.0, g=1 / 8, h=None), 4).passed


def test_report_json_serializable():
    report = validate(standard_policy(4), 4)
    json.dumps(report.to_json())


# ---------------------------------------------------------------- trajectory


def test_standard_policy_trajectory_margin():
    n = 4
    report = trajectory_sign_free(standard_policy(n), AnnealBase(1.0, 4, 2), np.logspace(0, 12, 50))
    assert report.all_ok
    assert report.margin_min == pytest.approx(1 / n)


def test_h_equal_g_trajectory_fails():
    policy = SchedulePolicy(c3=1.0, c4=2.0, g=0.2, h=0.2)
    report = trajectory_sign_free(policy, AnnealBase(1.0, 4, 1), np.logspace(0, 6, 20))
    assert not report.all_ok
    assert report.tanh_margin_min < 0


def test_ramp_phase_is_sign_free():
    policy = SchedulePolicy(c3=1.0, c4=2.0, g=0.125, h=0.5, gamma0=5.0)
    base = AnnealBase(1.0, 4, 2)
    ts = policy.switch_time(base)
    report = trajectory_sign_free(policy, base, np.linspace(0.0, ts * 0.999, 20))
    assert report.all_ok and report.margin_min is None


@given(st.integers(2, 10), st.floats(0.0, 12.0), st.floats(0.5, 4.0), st.integers(2, 16))
def test_passing_policy_is_sign_free_everywhere(n, log_t, beta, m):
    policy = standard_policy(n)
    base = AnnealBase(beta, m, 2)
    assert sign_free(policy.params_at(base, 10.0**log_t), base.degree)


def test_frozen_schedule_is_constant():
    from sqaxx.model import AnnealParams

    params = AnnealParams(1.0, 4, 1.0, 0.01)
    frozen = FrozenSchedule(params)
    assert frozen.params_at(None, 0.0) == frozen.params_at(None, 1e9) == params
