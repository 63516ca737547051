import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from sqaxx.model import AnnealParams, build_problem
from sqaxx.oracle import kernel_by_flip_count, pair_exponential, solve_matching_conditions
from sqaxx.schedule import AnnealBase, SchedulePolicy, standard_policy
from sqaxx.trotter import (
    NonStoquasticError,
    alpha3_prefactor_log,
    coefficient_derivatives,
    coefficients,
    coefficients_from_reduced,
    pair_kernel,
    sign_free,
    sign_margin,
    verify_pair_identity,
)

a_values = st.floats(1e-3, 4.0)
bk_values = st.floats(0.0, 2.0)


def strict_point(a, frac):
    """(a, b_K) strictly inside the sign-free region at fraction ``frac`` of the boundary."""
    return a, math.atanh(frac * math.tanh(a) ** 2)


# ---------------------------------------------------------------- pair kernel


def test_kernel_factorizes_without_catalyst():
    c0, c1, c2 = pair_kernel(0.5, 0.0)
    assert c0 == pytest.approx(math.cosh(0.5) ** 2, rel=1e-14)
    assert c1 == pytest.approx(math.cosh(0.5) * math.sinh(0.5), rel=1e-14)
    assert c2 == pytest.approx(math.sinh(0.5) ** 2, rel=1e-14)
    assert (c0, c1, c2) == pytest.approx((1.27154, 0.58760, 0.27154), abs=5e-6)


def test_pure_catalyst_has_negative_two_flip_weight():
    c0, c1, c2 = pair_kernel(0.0, 0.3)
    assert c0 == pytest.approx(math.cosh(0.3))
    assert c1 == 0.0
    assert c2 == pytest.approx(-math.sinh(0.3))


def test_kernel_reference_point():
    assert pair_kernel(0.5, 0.05) == pytest.approx((1.25955, 0.55894, 0.20828), abs=5e-6)


@given(a_values, bk_values)
def test_kernel_matches_dense_exponential(a, b_k):
    ref = kernel_by_flip_count(a, b_k)
    E = pair_exponential(a, b_k)
    got = pair_kernel(a, b_k)
    for x, y in zip(got, ref):
        assert x == pytest.approx(y, rel=1e-10, abs=1e-14 * E[0, 0])


@given(a_values, bk_values)
def test_kernel_weights_non_negative_except_two_flip(a, b_k):
    c0, c1, c2 = pair_kernel(a, b_k)
    assert c0 > 0 and c1 >= 0


@given(st.floats(0.01, 3.0), st.floats(0.0, 1.5), st.floats(1e-4, 0.5))
def test_two_flip_weight_decreases_in_catalyst(a, b_k, step):
    assert pair_kernel(a, b_k + step)[2] < pair_kernel(a, b_k)[2]


# ---------------------------------------------------------------- sign-free condition


def test_sign_free_examples():
    assert sign_free(AnnealParams(1.0, 1 * 2, 4.0, 0.1), 4)  # beta/M = 0.5
    # beta/M = 1, b = 4 normalization
    assert sign_free(AnnealParams(2.0, 2, 2.0, 0.05), 4)
    assert not sign_free(AnnealParams(2.0, 2, 1.0, 0.4), 4)
    assert sign_free(AnnealParams(2.0, 2, 0.3, 0.0), 4)


@given(st.floats(0.0, 4.0), st.floats(0.0, 2.0))
def test_sign_free_iff_two_flip_weight_non_negative(a, b_k):
    margin = sign_margin(a, b_k)
    assume(abs(margin) > 1e-12)
    assert (margin >= 0) == (pair_kernel(a, b_k)[2] >= 0)


def test_sign_free_on_boundary_curve():
    for a in np.linspace(0.05, 3.0, 40):
        k = math.atanh(math.tanh(a) ** 2)
        assert pair_kernel(a, k * (1 - 1e-9))[2] > 0
        assert pair_kernel(a, k * (1 + 1e-9))[2] < 0
        assert abs(pair_kernel(a, k)[2]) < 1e-12


# ---------------------------------------------------------------- coefficients


def test_reference_coefficients():
    co = coefficients_from_reduced(0.5, 0.05)
    assert co.alpha1 == pytest.approx(0.44991, abs=5e-6)
    # the four-digit values -0.04369 / -0.62541 are rounded; the oracle gives these
    assert co.alpha2 == pytest.approx(-0.0436804, abs=5e-8)
    assert co.lam == pytest.approx(-0.6253882, abs=5e-8)


def test_reference_coefficients_match_root_finder():
    co = coefficients_from_reduced(0.5, 0.05)
    assert (co.alpha1, co.alpha2, co.lam) == pytest.approx(solve_matching_conditions(0.5, 0.05), rel=1e-10)


@given(a_values, st.floats(0.0, 0.999))
def test_coefficients_match_root_finder(a, frac):
    a, b_k = strict_point(a, frac)
    co = coefficients_from_reduced(a, b_k)
    ref = solve_matching_conditions(a, b_k)
    assert (co.alpha1, co.alpha2, co.lam) == pytest.approx(ref, rel=1e-8, abs=1e-10)


def test_no_catalyst_branch():
    co = coefficients_from_reduced(0.5, 0.0)
    assert co.alpha1 == pytest.approx(0.5 * math.log(1 / math.tanh(0.5)), rel=1e-14)
    assert co.alpha1 == pytest.approx(0.38597, abs=5e-6)
    assert co.alpha2 == 0.0
    assert co.alpha3 is None
    assert math.isinf(co.d2)
    assert math.isfinite(co.lam)


def test_non_stoquastic_point_raises_with_margin():
    with pytest.raises(NonStoquasticError) as err:
        coefficients_from_reduced(0.3, 0.2)
    assert err.value.margin == pytest.approx(math.tanh(0.3) ** 2 - math.tanh(0.2))
    assert err.value.margin < 0


def test_boundary_point_is_rejected():
    a = 0.7
    # C2 vanishes at tanh(b_K) = tanh(a)^2; nudge inward by one ulp of the margin
    b_k = math.atanh(math.tanh(a) ** 2)
    with pytest.raises(NonStoquasticError):
        coefficients_from_reduced(a, b_k * (1 + 1e-12))


@given(a_values, st.floats(0.0, 0.999))
def test_closed_forms_match_raw_kernel_forms(a, frac):
    a, b_k = strict_point(a, frac)
    co = coefficients_from_reduced(a, b_k)
    c0, c1, c2 = co.c0_kernel, co.c1_kernel, co.c2_kernel
    assume(c2 > 1e-8 * c0)  # raw logs lose digits right at the boundary
    assert co.alpha1 == pytest.approx(0.25 * math.log(c0 / c2), rel=1e-8)
    assert co.alpha2 == pytest.approx(0.25 * math.log(c0 * c2 / c1**2), rel=1e-6, abs=1e-12)


@given(a_values, st.floats(0.0, 0.999))
def test_alpha1_positive_when_zero_flip_dominates(a, frac):
    co = coefficients_from_reduced(*strict_point(a, frac))
    assert co.c0_kernel > co.c2_kernel
    assert co.alpha1 > 0
    assert co.alpha2 <= 0


@given(st.floats(0.01, 3.0), st.floats(0.01, 0.99))
def test_lambda_and_alpha3_differ_by_prefactor(a, frac):
    a, b_k = strict_point(a, frac)
    assume(b_k > 1e-8)
    co = coefficients_from_reduced(a, b_k)
    assert co.lam == pytest.approx(co.alpha3 + alpha3_prefactor_log(a, b_k), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("a,b_k", [(0.5, 0.05), (1.0, 0.3), (0.5, 0.0)])
def test_pair_identity_examples(a, b_k):
    assert verify_pair_identity(a, b_k) <= 1e-10


@given(a_values, st.floats(0.0, 0.999))
def test_pair_identity_property(a, frac):
    assert verify_pair_identity(*strict_point(a, frac)) <= 1e-10


def test_coefficients_carry_context():
    p = AnnealParams(2.0, 4, 1.0, 0.01)
    co = coefficients(p, 2)
    assert co.beta_over_m == 0.5 and co.degree == 2 and co.trotter_slices == 4
    assert co.a == pytest.approx(2.0 * 1.0 / (2 * 4))


# ---------------------------------------------------------------- derivatives


@pytest.fixture
def ring4_base(ring4):
    return ring4, AnnealBase(1.0, 4, ring4.degree)


def test_alpha2_derivative_small_late(ring4_base):
    problem, base = ring4_base
    d = coefficient_derivatives(standard_policy(4), problem, base, 1e6)
    assert abs(d.alpha2_d1) < 1e-4
    assert d.halving_discrepancy < 1e-4


def test_alpha2_derivative_zero_without_catalyst(ring4_base):
    problem, base = ring4_base
    policy = SchedulePolicy(c3=1.0, c4=2.0, g=1 / 8, h=None)
    for t in (1e2, 1e4, 1e6, 1e8):
        d = coefficient_derivatives(policy, problem, base, t)
        assert d.alpha2_d1 == 0.0 and d.alpha2_d2 == 0.0


@pytest.mark.parametrize("t", [1e3, 1e5, 1e7])
def test_alpha1_derivative_matches_analytic_without_catalyst(ring4_base, t):
    problem, base = ring4_base
    policy = SchedulePolicy(c3=1.0, c4=2.0, g=1 / 8, h=None)
    d = coefficient_derivatives(policy, problem, base, t)
    analytic = (1 / 16) / (t + 2)  # alpha1 = c1 = (g/2) log(c3 t + c4) exactly
    assert d.alpha1_d1 == pytest.approx(analytic, rel=1e-5)


def test_alpha1_derivative_approaches_analytic_with_catalyst(ring4_base):
    problem, base = ring4_base
    policy = standard_policy(4)
    gaps = []
    for t in (1e3, 1e5, 1e7, 1e9):
        d = coefficient_derivatives(policy, problem, base, t)
        assert d.alpha1_d1 > 0
        gaps.append(abs(d.alpha1_d1 / ((1 / 16) / (t + 2)) - 1))
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_derivative_stencil_cannot_cross_switch(ring4_base):
    problem, base = ring4_base
    policy = SchedulePolicy(c3=1.0, c4=2.0, g=1 / 8, h=0.5, t_switch=100.0, gamma0=5.0)
    with pytest.raises(ValueError):
        coefficient_derivatives(policy, problem, base, 100.05)
