"""Trotterized classical action beta*H0 and its local flip differences.

All energies here are dimensionless and already multiplied by beta::

    beta*H0 = -sum_k sum_<ij> [ (beta J_ij / M) s_i^k s_j^k
                                + alpha1 (u_i^k + u_j^k)
                                + alpha2 u_i^k u_j^k + lam ]

with ``u_i^k = s_i^(k+1) s_i^k`` and slices periodic mod M. The constant ``lam``
term is kept in :func:`energy` but cancels from every flip difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import IsingProblem, SpinPath
from .trotter import TrotterCoefficients


@dataclass(frozen=True)
class EnergyBreakdown:
    """Signed pieces of beta*H0; ``total = -(ising + alpha1 + alpha2 + constant)``."""

    ising_part: float
    alpha1_part: float
    alpha2_part: float
    constant_part: float
    total: float


def _spins(path) -> np.ndarray:
    return path.spins if isinstance(path, SpinPath) else np.asarray(path)


def _check_dims(spins: np.ndarray, problem: IsingProblem, coeffs: TrotterCoefficients):
    if spins.shape[-2] != problem.n_spins:
        raise ValueError(f"path has {spins.shape[-2]} sites, problem has {problem.n_spins}")
    if coeffs.trotter_slices is not None and spins.shape[-1] != coeffs.trotter_slices:
        raise ValueError(f"path has {spins.shape[-1]} slices, coefficients were built for {coeffs.trotter_slices}")
    if coeffs.degree is not None and coeffs.degree != problem.degree:
        raise ValueError(f"coefficients built for degree {coeffs.degree}, problem has degree {problem.degree}")
    if coeffs.beta_over_m is None:
        raise ValueError("coefficients carry no beta/M; build them with trotter.coefficients(params, degree)")


def energy_terms(spins: np.ndarray, problem: IsingProblem, coeffs: TrotterCoefficients) -> dict[str, np.ndarray]:
    """Vectorised pieces of beta*H0 for paths of shape (..., N, M)."""
    s = np.asarray(spins, dtype=np.float64)
    _check_dims(s, problem, coeffs)
    m = s.shape[-1]
    u = s * np.roll(s, -1, axis=-1)  # u[..., i, k] = s_i^(k+1) s_i^k
    bi, bj = problem.bond_sites[:, 0], problem.bond_sites[:, 1]
    same_slice = s[..., bi, :] * s[..., bj, :]
    ising = coeffs.beta_over_m * np.einsum("b,...bk->...", problem.couplings, same_slice)
    a1 = coeffs.alpha1 * (u[..., bi, :] + u[..., bj, :]).sum(axis=(-2, -1))
    a2 = coeffs.alpha2 * (u[..., bi, :] * u[..., bj, :]).sum(axis=(-2, -1))
    const = np.full(ising.shape, coeffs.lam * m * problem.n_bonds)
    return {"ising": ising, "alpha1": a1, "alpha2": a2, "constant": const, "total": -(ising + a1 + a2 + const)}


def energy(path, problem: IsingProblem, coeffs: TrotterCoefficients) -> EnergyBreakdown:
    """beta*H0 of one path, split by term."""
    terms = energy_terms(_spins(path)[None], problem, coeffs)
    return EnergyBreakdown(
        ising_part=float(terms["ising"][0]),
        alpha1_part=float(terms["alpha1"][0]),
        alpha2_part=float(terms["alpha2"][0]),
        constant_part=float(terms["constant"][0]),
        total=float(terms["total"][0]),
    )


def total_energy(spins: np.ndarray, problem: IsingProblem, coeffs: TrotterCoefficients) -> np.ndarray:
    return energy_terms(spins, problem, coeffs)["total"]


def _check_site(spins, i, k):
    n, m = spins.shape
    if not (0 <= i < n and 0 <= k < m):
        raise IndexError(f"(site {i}, slice {k}) outside a {n}x{m} path")


def _site_terms(s, i, k, problem, coeffs, skip_bond=-1):
    """Bond-sum part of the single-flip difference at (i, k), optionally skipping one bond."""
    m = s.shape[1]
    kp, km = (k + 1) % m, (k - 1) % m
    si = s[i, k]
    ui_up, ui_dn = s[i, kp] * si, si * s[i, km]
    w = coeffs.beta_over_m
    total = 0.0
    for b in problem.incident[i]:
        if b == skip_bond:
            continue
        p, q, J = problem.bonds[b]
        l = q if p == i else p
        sl = s[l, k]
        total += 2.0 * w * J * si * sl
        total += 2.0 * coeffs.alpha2 * (ui_up * s[l, kp] * sl + ui_dn * sl * s[l, km])
    return total, ui_up + ui_dn


def delta_single(path, i: int, k: int, problem: IsingProblem, coeffs: TrotterCoefficients) -> float:
    """beta*H0(after) - beta*H0(before) for flipping spin (i, k); O(degree)."""
    s = _spins(path)
    _check_dims(s, problem, coeffs)
    _check_site(s, i, k)
    bond_part, u_sum = _site_terms(s, i, k, problem, coeffs)
    return float(bond_part + 2.0 * problem.degree * coeffs.alpha1 * u_sum)


def delta_double(path, i: int, j: int, k: int, problem: IsingProblem, coeffs: TrotterCoefficients) -> float:
    """beta*H0 difference for flipping the bonded pair (i, j) together on slice k.

    The pair's own Ising and alpha2 terms are unchanged by the move and excluded.
    """
    s = _spins(path)
    _check_dims(s, problem, coeffs)
    _check_site(s, i, k)
    _check_site(s, j, k)
    bond = problem.find_bond(i, j)
    part_i, u_i = _site_terms(s, i, k, problem, coeffs, skip_bond=bond)
    part_j, u_j = _site_terms(s, j, k, problem, coeffs, skip_bond=bond)
    return float(part_i + part_j + 2.0 * problem.degree * coeffs.alpha1 * (u_i + u_j))


def pair_offset(path, i: int, j: int, k: int, problem: IsingProblem, coeffs: TrotterCoefficients) -> float:
    """delta = (beta/M) J_ij s_i s_j + alpha2 (u_i^k u_j^k + u_i^(k-1) u_j^(k-1)).

    Relates the pair and single flips: with ``-beta H_{i,k} = delta_single / 2`` and
    ``-beta H_{i,j,k} = delta_double / 2`` one has
    ``beta H_{i,j,k} = beta H_{i,k} + beta H_{j,k} + 2 delta``.
    """
    s = _spins(path)
    _check_dims(s, problem, coeffs)
    m = s.shape[1]
    bond = problem.find_bond(i, j)
    J = problem.bonds[bond][2]
    kp, km = (k + 1) % m, (k - 1) % m
    up = s[i, kp] * s[i, k] * s[j, kp] * s[j, k]
    dn = s[i, k] * s[i, km] * s[j, k] * s[j, km]
    return float(coeffs.beta_over_m * J * s[i, k] * s[j, k] + coeffs.alpha2 * (up + dn))
