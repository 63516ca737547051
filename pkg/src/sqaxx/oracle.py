"""Brute-force references used to check the fast paths.

Nothing here is on the simulation hot path. Every function is a direct,
small-scale evaluation (dense matrices, exhaustive sums) meant to be
obviously correct rather than fast.
"""

from __future__ import annotations

import math
from functools import reduce

import numpy as np
import scipy.linalg

from .energy import total_energy
from .model import AnnealParams, IsingProblem, index_to_spins
from .trotter import NonStoquasticError, coefficients, reduced_params, sign_margin

_I2 = np.eye(2)
_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_Z = np.diag([1.0, -1.0])

QUANTUM_LIMIT = 6
ENUMERATION_LIMIT = 20


def pair_exponential(a: float, b_k: float) -> np.ndarray:
    """exp(a (X1 + X2) - b_K X1 X2) from its commuting closed-form factors.

    Basis order is |s1 s2> with s = +1 first, i.e. (++, +-, -+, --).
    """
    ea = math.cosh(a) * _I2 + math.sinh(a) * _X
    xx = np.kron(_X, _X)
    eb = math.cosh(b_k) * np.eye(4) - math.sinh(b_k) * xx
    return np.kron(ea, _I2) @ np.kron(_I2, ea) @ eb


def pair_exponential_generic(a: float, b_k: float) -> np.ndarray:
    """The same matrix by generic scaling-and-squaring (Pade) exponentiation."""
    gen = a * (np.kron(_X, _I2) + np.kron(_I2, _X)) - b_k * np.kron(_X, _X)
    return scipy.linalg.expm(gen)


def kernel_by_flip_count(a: float, b_k: float) -> tuple[float, float, float]:
    """Read the zero-, one- and two-flip weights off the dense pair exponential."""
    E = pair_exponential(a, b_k)
    return float(E[0, 0]), float(E[1, 0]), float(E[3, 0])


def solve_matching_conditions(a: float, b_k: float) -> tuple[float, float, float]:
    """Find (alpha1, alpha2, lam) with exp(alpha1 (u+v) + alpha2 u v + lam) = kernel weight.

    Takes the logarithm of the three conditions (u, v) = (+,+), (+,-), (-,-),
    which are then linear in the unknowns, and solves them against weights read
    off the dense exponential. It shares nothing with the closed forms.
    """
    w0, w1, w2 = kernel_by_flip_count(a, b_k)
    if not (w0 > 0 and w1 > 0 and w2 > 0):
        raise NonStoquasticError(sign_margin(a, b_k), a, b_k)
    targets = np.array([w0, w1, w2])
    feats = np.array([[2.0, 1.0, 1.0], [0.0, -1.0, 1.0], [-2.0, 1.0, 1.0]])
    x = np.linalg.solve(feats, np.log(targets))
    residual = np.exp(feats @ x) / targets - 1.0
    if np.max(np.abs(residual)) > 1e-12:
        raise ArithmeticError(f"matching conditions violated by {np.max(np.abs(residual)):.2e}")
    return tuple(float(v) for v in x)


def _site_op(op: np.ndarray, i: int, n: int) -> np.ndarray:
    return reduce(np.kron, [op if q == i else _I2 for q in range(n)])


def quantum_hamiltonian(problem: IsingProblem, gamma: float, kappa: float) -> np.ndarray:
    """Dense H = -sum J Z_i Z_j - Gamma sum X_i + K sum X_i X_j over the bonds."""
    n = problem.n_spins
    if n > QUANTUM_LIMIT:
        raise ValueError(f"N={n} exceeds the dense quantum cap of {QUANTUM_LIMIT}")
    dim = 1 << n
    H = np.zeros((dim, dim))
    xs = [_site_op(_X, i, n) for i in range(n)]
    zs = [_site_op(_Z, i, n) for i in range(n)]
    for i, j, J in problem.bonds:
        H -= J * zs[i] @ zs[j]
        H += kappa * xs[i] @ xs[j]
    for x in xs:
        H -= gamma * x
    return H


def quantum_partition(problem: IsingProblem, params: AnnealParams, method: str = "eigh") -> float:
    """Tr exp(-beta H) by Hermitian eigensolve ("eigh") or dense exponential ("expm")."""
    H = quantum_hamiltonian(problem, params.gamma, params.kappa)
    if method == "eigh":
        vals = np.linalg.eigvalsh(H)
        return float(np.exp(-params.beta * vals).sum())
    if method == "expm":
        return float(np.trace(scipy.linalg.expm(-params.beta * H)))
    raise ValueError(f"unknown method {method!r}")


def _slice_states(n: int) -> np.ndarray:
    """All single-slice configurations, index order matching the pair basis (+ first)."""
    bits = (np.arange(1 << n)[:, None] >> np.arange(n - 1, -1, -1)) & 1
    return (1 - 2 * bits).astype(np.int8)  # bit 0 -> +1


def transfer_matrix(problem: IsingProblem, params: AnnealParams) -> np.ndarray:
    """Slice transfer matrix built from the raw pair exponential (no effective couplings).

    T[s', s] = prod_bonds <s'_i s'_j| exp(a(X_i + X_j) - b_K X_i X_j) |s_i s_j> * exp((beta/M) sum J s_i s_j),
    i.e. the product of per-bond local weights that the effective-coupling action encodes.

    For degree 1 this is exactly the slice matrix element of
    exp((beta Gamma/M) sum X - (beta K/M) sum X X). For degree b >= 2 it is not: a
    site shared by b bonds picks up cosh(a)^b / sinh(a)^b rather than
    cosh(b a) / sinh(b a), so Z_ST only tracks the quantum partition sum at b = 1.
    """
    n = problem.n_spins
    a, b_k = reduced_params(params, problem.degree)
    P = pair_exponential(a, b_k)
    states = _slice_states(n)
    bit = (states < 0).astype(int)  # 0 for +1, 1 for -1
    T = np.ones((1 << n, 1 << n))
    for i, j, _ in problem.bonds:
        pair_idx = 2 * bit[:, i] + bit[:, j]
        T *= P[np.ix_(pair_idx, pair_idx)]
    ising = params.beta_over_m * (states[:, problem.bond_sites[:, 0]] * states[:, problem.bond_sites[:, 1]]) @ problem.couplings
    return T * np.exp(ising)[None, :]


def st_partition(problem: IsingProblem, params: AnnealParams, method: str = "transfer") -> float:
    """Partition sum of the Trotterized classical model.

    ``"transfer"``: trace of the M-th power of :func:`transfer_matrix`.
    ``"enumerate"``: exhaustive sum of exp(-beta H0) over all 2^(N M) paths
    using the effective-coupling action (N*M <= 20).
    """
    if params.trotter_slices < 2:
        raise ValueError("M must be at least 2")
    co = coefficients(params, problem.degree)
    if not co.c2_kernel > 0:
        raise NonStoquasticError(co.margin, co.a, co.b_k)
    if method == "transfer":
        T = transfer_matrix(problem, params)
        return float(np.trace(np.linalg.matrix_power(T, params.trotter_slices)))
    if method == "enumerate":
        e = _all_energies(problem, params)
        return float(np.exp(-e).sum())
    raise ValueError(f"unknown method {method!r}")


def _all_energies(problem: IsingProblem, params: AnnealParams) -> np.ndarray:
    n, m = problem.n_spins, params.trotter_slices
    if n * m > ENUMERATION_LIMIT:
        raise ValueError(f"N*M={n * m} exceeds the enumeration cap of {ENUMERATION_LIMIT}")
    co = coefficients(params, problem.degree)
    out = np.empty(1 << (n * m))
    chunk = 1 << 16
    for start in range(0, out.shape[0], chunk):
        idx = np.arange(start, min(start + chunk, out.shape[0]))
        out[idx] = total_energy(index_to_spins(idx, n, m), problem, co)
    return out


def exact_boltzmann(problem: IsingProblem, params: AnnealParams) -> np.ndarray:
    """exp(-beta H0(s)) / Z_ST over all paths, in state-index order."""
    e = _all_energies(problem, params)
    p = np.exp(-(e - e.min()))
    return p / p.sum()


def classical_partition(problem: IsingProblem, beta: float) -> float:
    """sum over classical configurations of exp(beta sum J s_i s_j)."""
    states = _slice_states(problem.n_spins).astype(float)
    return float(np.exp(-beta * problem.classical_energy(states)).sum())
