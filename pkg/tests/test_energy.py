import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqaxx.energy import delta_double, delta_single, energy, energy_terms, pair_offset
from sqaxx.model import AnnealParams, ProblemError, SpinPath, build_problem
from sqaxx.trotter import coefficients


def coeffs_for(problem, params):
    return coefficients(params, problem.degree)


def brute_force_action(spins, problem, co):
    """Term-by-term sum of the effective action, written independently of energy.py."""
    n, m = spins.shape
    total = 0.0
    for k in range(m):
        kp = (k + 1) % m
        for i, j, J in problem.bonds:
            ui = spins[i, kp] * spins[i, k]
            uj = spins[j, kp] * spins[j, k]
            total += co.beta_over_m * J * spins[i, k] * spins[j, k]
            total += co.alpha1 * (ui + uj) + co.alpha2 * ui * uj + co.lam
    return -total


@pytest.fixture
def ref_params():
    # beta/M = 1 with b = 1 gives a = 0.5 at Gamma = 0.5 and b_K = 0.05 at K = 0.05
    return AnnealParams(2.0, 2, 0.5, 0.05)


def test_all_up_single_bond(single_bond, ref_params):
    co = coeffs_for(single_bond, ref_params)
    assert co.a == pytest.approx(0.5) and co.b_k == pytest.approx(0.05)
    e = energy(SpinPath.all_up(2, 2), single_bond, co)
    expected = -(2 * 1.0 * 1 + co.alpha1 * 4 + co.alpha2 * 2 + 2 * co.lam)
    assert e.total == pytest.approx(expected, rel=1e-14)
    assert e.total == pytest.approx(-(e.ising_part + e.alpha1_part + e.alpha2_part + e.constant_part))


def test_all_up_single_flip_delta(single_bond, ref_params):
    co = coeffs_for(single_bond, ref_params)
    d = delta_single(SpinPath.all_up(2, 2), 0, 0, single_bond, co)
    # Ising term 2 (beta/M) J, alpha2 term 2 alpha2 (1 + 1), alpha1 term 2 b alpha1 (1 + 1)
    assert d == pytest.approx(2 * 1.0 * 1.0 + 2 * co.alpha2 * 2 + 2 * co.alpha1 * 2, rel=1e-14)


def test_no_catalyst_drops_quartic_term(single_bond):
    co = coeffs_for(single_bond, AnnealParams(1.0, 4, 1.0, 0.0))
    path = SpinPath.random(2, 4, np.random.default_rng(1))
    assert energy(path, single_bond, co).alpha2_part == 0.0


def test_zero_coupling_has_no_ising_part():
    p = build_problem(2, "edge-list", [(0, 1, 0.0)])
    co = coeffs_for(p, AnnealParams(1.0, 3, 5.0, 0.0))
    path = SpinPath.random(2, 3, np.random.default_rng(2))
    assert energy(path, p, co).ising_part == 0.0


def test_dimension_mismatch(ring3, single_bond):
    co = coeffs_for(ring3, AnnealParams(1.0, 3, 1.0, 0.0))
    with pytest.raises(ValueError):
        energy(SpinPath.all_up(2, 3), ring3, co)
    with pytest.raises(ValueError):
        energy(SpinPath.all_up(3, 4), ring3, co)
    with pytest.raises(ValueError):
        energy(SpinPath.all_up(2, 3), single_bond, co)  # degree mismatch


def test_index_out_of_range(ring3):
    co = coeffs_for(ring3, AnnealParams(1.0, 3, 1.0, 0.0))
    with pytest.raises(IndexError):
        delta_single(SpinPath.all_up(3, 3), 3, 0, ring3, co)
    with pytest.raises(IndexError):
        delta_single(SpinPath.all_up(3, 3), 0, 3, ring3, co)


def test_pair_move_requires_bond(ring4):
    co = coeffs_for(ring4, AnnealParams(1.0, 3, 3.0, 0.0))
    with pytest.raises(ProblemError):
        delta_double(SpinPath.all_up(4, 3), 0, 2, 0, ring4, co)


def test_pair_move_own_coupling_cancels(single_bond):
    co = coeffs_for(single_bond, AnnealParams(1.0, 2, 1.0, 0.01))
    path = SpinPath.all_up(2, 2)
    d = delta_double(path, 0, 1, 0, single_bond, co)
    # only the Trotter-bond terms of the two flipped spins change
    assert d == pytest.approx(2 * co.alpha1 * 2 * 2, rel=1e-14)


# ---------------------------------------------------------------- property tests

PROBLEMS = {
    "bond": build_problem(2, "edge-list", [(0, 1, 0.8)]),
    "ring3": build_problem(3, "ring", [1.0, -0.5, 0.7]),
    "ring4": build_problem(4, "ring", [1.0, -1.0, 0.3, 2.0]),
    "k4": build_problem(4, "complete", 0.6),
}


@st.composite
def cases(draw):
    name = draw(st.sampled_from(sorted(PROBLEMS)))
    problem = PROBLEMS[name]
    m = draw(st.integers(2, 4))
    beta = draw(st.floats(0.2, 4.0))
    gamma = draw(st.floats(0.2, 4.0))
    co0 = coefficients(AnnealParams(beta, m, gamma, 0.0), problem.degree)
    frac = draw(st.floats(0.0, 0.95))
    kappa = m / beta * np.arctanh(frac * np.tanh(co0.a) ** 2)
    params = AnnealParams(beta, m, gamma, float(kappa))
    bits = draw(st.lists(st.sampled_from([-1, 1]), min_size=problem.n_spins * m, max_size=problem.n_spins * m))
    path = np.array(bits, dtype=np.int8).reshape(problem.n_spins, m)
    return problem, coefficients(params, problem.degree), path


@given(cases())
def test_energy_matches_term_by_term_sum(case):
    problem, co, path = case
    assert energy(path, problem, co).total == pytest.approx(brute_force_action(path, problem, co), rel=1e-12, abs=1e-12)


@given(cases(), st.data())
def test_single_delta_matches_recomputation(case, data):
    problem, co, path = case
    i = data.draw(st.integers(0, problem.n_spins - 1))
    k = data.draw(st.integers(0, path.shape[1] - 1))
    flipped = path.copy()
    flipped[i, k] *= -1
    expected = energy(flipped, problem, co).total - energy(path, problem, co).total
    assert delta_single(path, i, k, problem, co) == pytest.approx(expected, abs=1e-12)


@given(cases(), st.data())
def test_single_delta_is_antisymmetric(case, data):
    problem, co, path = case
    i = data.draw(st.integers(0, problem.n_spins - 1))
    k = data.draw(st.integers(0, path.shape[1] - 1))
    flipped = path.copy()
    flipped[i, k] *= -1
    assert delta_single(path, i, k, problem, co) + delta_single(flipped, i, k, problem, co) == pytest.approx(0, abs=1e-12)


@given(cases(), st.data())
def test_double_delta_matches_recomputation(case, data):
    problem, co, path = case
    i, j, _ = problem.bonds[data.draw(st.integers(0, problem.n_bonds - 1))]
    k = data.draw(st.integers(0, path.shape[1] - 1))
    flipped = path.copy()
    flipped[i, k] *= -1
    flipped[j, k] *= -1
    expected = energy(flipped, problem, co).total - energy(path, problem, co).total
    assert delta_double(path, i, j, k, problem, co) == pytest.approx(expected, abs=1e-12)


@given(cases(), st.data())
def test_pair_offset_identity(case, data):
    problem, co, path = case
    i, j, _ = problem.bonds[data.draw(st.integers(0, problem.n_bonds - 1))]
    k = data.draw(st.integers(0, path.shape[1] - 1))
    h_ijk = -delta_double(path, i, j, k, problem, co) / 2
    h_ik = -delta_single(path, i, k, problem, co) / 2
    h_jk = -delta_single(path, j, k, problem, co) / 2
    off = pair_offset(path, i, j, k, problem, co)
    assert h_ijk == pytest.approx(h_ik + h_jk + 2 * off, abs=1e-12)


def test_literal_pair_offset_form_fails_on_asymmetric_neighbourhood(ring3):
    # The form H_ijk = 2 H_ik + 2 delta needs H_ik == H_jk, which generic paths violate.
    co = coeffs_for(ring3, AnnealParams(2.0, 4, 3.0, 0.1))
    path = np.ones((3, 4), dtype=np.int8)
    path[2, 0] = -1  # site 2 neighbours both 0 and 1 but breaks their symmetry on slice 0
    path[0, 1] = -1
    h_ijk = -delta_double(path, 0, 1, 0, ring3, co) / 2
    h_ik = -delta_single(path, 0, 0, ring3, co) / 2
    h_jk = -delta_single(path, 1, 0, ring3, co) / 2
    off = pair_offset(path, 0, 1, 0, ring3, co)
    assert h_ik != pytest.approx(h_jk)
    assert h_ijk != pytest.approx(2 * h_ik + 2 * off)
    assert h_ijk == pytest.approx(h_ik + h_jk + 2 * off, abs=1e-12)


@given(cases(), st.data())
def test_locality(case, data):
    """Deltas ignore spins outside slices k-1..k+1 and outside the neighbourhood of the moved sites."""
    problem, co, path = case
    n, m = path.shape
    i = data.draw(st.integers(0, n - 1))
    k = data.draw(st.integers(0, m - 1))
    near_slices = {(k - 1) % m, k, (k + 1) % m}
    neighbours = {i} | {q for b in problem.incident[i] for q in problem.bonds[b][:2]}
    scrambled = path.copy()
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    for q in range(n):
        for kk in range(m):
            if q not in neighbours or kk not in near_slices:
                scrambled[q, kk] = rng.choice([-1, 1])
    assert delta_single(scrambled, i, k, problem, co) == delta_single(path, i, k, problem, co)


@given(cases(), st.integers(-5, 5))
def test_slice_rotation_invariance(case, shift):
    problem, co, path = case
    rolled = SpinPath(path).roll(shift)
    assert energy(rolled, problem, co).total == pytest.approx(energy(path, problem, co).total, rel=1e-12, abs=1e-12)


def test_exhaustive_small_lattice(ring3):
    co = coeffs_for(ring3, AnnealParams(1.5, 2, 2.0, 0.05))
    paths = np.array([np.array(bits, dtype=np.int8).reshape(3, 2) for bits in itertools.product([-1, 1], repeat=6)])
    batch = energy_terms(paths, ring3, co)["total"]
    for p, e in zip(paths, batch):
        assert e == pytest.approx(brute_force_action(p, ring3, co), rel=1e-12, abs=1e-12)
