"""Exact master-equation generator and its symmetrized quantum Hamiltonian (tiny systems).

States are the 2^(N*M) spin paths, indexed as in :func:`sqaxx.model.spins_to_index`
(row-major over (site, slice), first entry most significant, -1 -> 0, +1 -> 1).

The generator uses heat-bath rates for single flips and bonded same-slice pair
flips::

    W[s, s~] = 1 / (1 + exp(E(s) - E(s~)))   (rate s~ -> s, s != s~)
    W[s, s]  = -sum_{s'} W[s', s]

with E = beta*H0. The similarity transform ``H = -D W D^-1``, with
``D = diag(exp(E/2))``, is symmetric with off-diagonals ``-1/(2 cosh(dE/2))``.
Its ground state is ``exp(-E/2)`` at eigenvalue 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.special
import scipy.sparse.linalg

from .energy import total_energy
from .model import AnnealParams, IsingProblem, SpinPath, index_to_spins
from .schedule import AnnealBase, FrozenSchedule, fd_step
from .trotter import NonStoquasticError, coefficients

DENSE_LIMIT = 1 << 12
SPARSE_LIMIT = 1 << 20


class StateSpaceError(ValueError):
    """The requested state space exceeds the supported size."""


@dataclass(frozen=True)
class StateSpace:
    n_sites: int
    n_slices: int

    def __post_init__(self):
        if self.n_bits > 20:
            raise StateSpaceError(f"N*M = {self.n_bits} exceeds the cap of 20")

    @property
    def n_bits(self) -> int:
        return self.n_sites * self.n_slices

    @property
    def n_states(self) -> int:
        return 1 << self.n_bits

    def bit(self, i: int, k: int) -> int:
        """Bit position of spin (i, k) inside a state index."""
        return self.n_bits - 1 - (i * self.n_slices + k)

    def path(self, index: int) -> SpinPath:
        return SpinPath.from_index(index, self.n_sites, self.n_slices)

    def index(self, path: SpinPath) -> int:
        return path.to_index()

    @cached_property
    def all_spins(self) -> np.ndarray:
        return index_to_spins(np.arange(self.n_states), self.n_sites, self.n_slices)

    def move_masks(self, problem: IsingProblem) -> tuple[np.ndarray, np.ndarray]:
        """XOR masks of all single-flip and bonded pair-flip moves."""
        m = self.n_slices
        single = [1 << self.bit(i, k) for i in range(self.n_sites) for k in range(m)]
        double = [(1 << self.bit(i, k)) | (1 << self.bit(j, k)) for i, j, _ in problem.bonds for k in range(m)]
        return np.array(single, dtype=np.int64), np.array(double, dtype=np.int64)


def path_energies(problem: IsingProblem, params: AnnealParams, space: Optional[StateSpace] = None) -> np.ndarray:
    """beta*H0 for every state, in index order."""
    space = space or StateSpace(problem.n_spins, params.trotter_slices)
    co = coefficients(params, problem.degree)
    if not co.c2_kernel > 0:
        raise NonStoquasticError(co.margin, co.a, co.b_k)
    return total_energy(space.all_spins, problem, co)


@dataclass(frozen=True)
class GeneratorMatrices:
    W: np.ndarray
    H0_diag: np.ndarray
    H_quantum: np.ndarray

    @property
    def n_states(self) -> int:
        return self.H0_diag.shape[0]

    def ground_vector(self) -> np.ndarray:
        """Normalized ``exp(-E/2)``."""
        e = self.H0_diag
        v = np.exp(-(e - e.min()) / 2.0)
        return v / np.linalg.norm(v)

    def stationary(self) -> np.ndarray:
        e = self.H0_diag
        p = np.exp(-(e - e.min()))
        return p / p.sum()


def _rates(energies: np.ndarray, masks: np.ndarray):
    """(rows, cols, rate, symmetric value) for every move from every state."""
    n = energies.shape[0]
    src = np.arange(n, dtype=np.int64)
    cols = np.tile(src, masks.shape[0])
    rows = (src[None, :] ^ masks[:, None]).ravel()
    d = energies[rows] - energies[cols]
    rate = scipy.special.expit(-d)  # 1/(1+e^d) without overflow or cancellation
    x = np.exp(-np.abs(d) / 2.0)
    sym = x / (1.0 + x * x)  # 1/(2 cosh(d/2))
    return rows, cols, rate, sym


def build_generator(problem: IsingProblem, params: AnnealParams) -> GeneratorMatrices:
    """Dense W, beta*H0 and H for one parameter point (at most 4096 states)."""
    space = StateSpace(problem.n_spins, params.trotter_slices)
    if space.n_states > DENSE_LIMIT:
        raise StateSpaceError(f"{space.n_states} states exceed the dense limit {DENSE_LIMIT}; use build_sparse")
    e = path_energies(problem, params, space)
    single, double = space.move_masks(problem)
    rows, cols, rate, sym = _rates(e, np.concatenate([single, double]))
    n = space.n_states
    W = np.zeros((n, n))
    np.add.at(W, (rows, cols), rate)
    W[np.diag_indices(n)] = -W.sum(axis=0)
    H = np.zeros((n, n))
    np.add.at(H, (rows, cols), -sym)
    H[np.diag_indices(n)] = -np.diag(W)
    return GeneratorMatrices(W, e, H)


@dataclass(frozen=True)
class SparseGenerator:
    H: scipy.sparse.csr_matrix
    H0_diag: np.ndarray

    def ground_vector(self) -> np.ndarray:
        e = self.H0_diag
        v = np.exp(-(e - e.min()) / 2.0)
        return v / np.linalg.norm(v)


def build_sparse(problem: IsingProblem, params: AnnealParams) -> SparseGenerator:
    """Sparse H for up to 2^20 states (matrix-vector work only)."""
    space = StateSpace(problem.n_spins, params.trotter_slices)
    e = path_energies(problem, params, space)
    single, double = space.move_masks(problem)
    rows, cols, rate, sym = _rates(e, np.concatenate([single, double]))
    n = space.n_states
    diag = np.bincount(cols, weights=rate, minlength=n)
    H = scipy.sparse.coo_matrix(
        (np.concatenate([-sym, diag]), (np.concatenate([rows, np.arange(n)]), np.concatenate([cols, np.arange(n)]))),
        shape=(n, n),
    ).tocsr()
    return SparseGenerator(H, e)


def sparse_gap_estimate(gen: SparseGenerator, *, tol: float = 1e-10, max_iter: int = 200000, seed: int = 0) -> float:
    """Gap of H by power iteration on ``c I - H``, deflated against the known ground vector.

    ``c`` is a Gershgorin upper bound on the spectrum, so the dominant
    eigenvalue of ``c I - H`` restricted to the complement of ``exp(-E/2)`` is
    ``c - Delta``. Convergence is slow when the gap is tiny relative to ``c``.
    """
    H = gen.H
    psi0 = gen.ground_vector()
    absrow = np.asarray(abs(H).sum(axis=1)).ravel()
    c = float(absrow.max())
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(H.shape[0])
    v -= psi0 * (psi0 @ v)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = c * v - H @ v
        w -= psi0 * (psi0 @ w)
        new_lam = float(v @ w)
        v = w / np.linalg.norm(w)
        if abs(new_lam - lam) <= tol * max(1.0, abs(new_lam)):
            lam = new_lam
            break
        lam = new_lam
    return c - lam


def spectral_gap(matrices, *, ground_tol: float = 1e-10) -> float:
    """Gap between the two lowest eigenvalues of H (dense symmetric eigensolve).

    Raises:
        ArithmeticError: if the lowest eigenvalue is not 0 within ``ground_tol``.
    """
    H = matrices.H_quantum if isinstance(matrices, GeneratorMatrices) else np.asarray(matrices)
    vals = scipy.linalg.eigh(H, eigvals_only=True, subset_by_index=[0, 1])
    if abs(vals[0]) > ground_tol:
        raise ArithmeticError(f"ground eigenvalue {vals[0]:.3e} is not zero")
    return float(vals[1] - vals[0])


def _two_lowest(H: np.ndarray) -> np.ndarray:
    return scipy.linalg.eigh(H, eigvals_only=True, subset_by_index=[0, 1])


@dataclass(frozen=True)
class AdiabaticReport:
    t: float
    gamma: float
    kappa: float
    alpha1: float
    alpha2: float
    gap_H: float
    gap_Hcal: float
    norm_dHdt: float
    ratio: float

    def row(self) -> tuple:
        return (self.t, self.gamma, self.kappa, self.alpha1, self.alpha2, self.gap_H, self.gap_Hcal, self.norm_dHdt, self.ratio)


ADIABATIC_COLUMNS = ("t", "gamma", "kappa", "alpha1", "alpha2", "gap_H", "gap_Hcal", "norm_dHdt", "ratio")


def adiabatic_ratio(policy, problem: IsingProblem, base: AnnealBase, t: float) -> AdiabaticReport:
    """``||d Hcal/dt|| / Delta^2`` at schedule time ``t``, with ``Hcal = H - (1/2) d(beta H0)/dt``.

    Derivatives are central differences with the shared schedule step. The
    norm is the spectral norm. ``ratio`` uses the gap of H; the gap of Hcal is
    reported alongside.
    """
    params = policy.params_at(base, t)
    frozen = isinstance(policy, FrozenSchedule)
    co = coefficients(params, problem.degree)
    mid = build_generator(problem, params)
    gap_h = spectral_gap(mid)
    if frozen:
        return AdiabaticReport(t, params.gamma, params.kappa, co.alpha1, co.alpha2, gap_h, gap_h, 0.0, 0.0)
    h = fd_step(policy, t)
    if t - h < policy.switch_time(base):
        raise ValueError(f"stencil at t={t} crosses the schedule switch")
    lo = build_generator(problem, policy.params_at(base, t - h))
    hi = build_generator(problem, policy.params_at(base, t + h))
    de = (hi.H0_diag - lo.H0_diag) / (2.0 * h)
    d2e = (hi.H0_diag - 2.0 * mid.H0_diag + lo.H0_diag) / (h * h)
    dH = (hi.H_quantum - lo.H_quantum) / (2.0 * h) - 0.5 * np.diag(d2e)
    hcal = mid.H_quantum - 0.5 * np.diag(de)
    ev = _two_lowest(hcal)
    gap_hcal = float(ev[1] - ev[0])
    norm = float(np.linalg.norm(dH, ord=2))
    return AdiabaticReport(t, params.gamma, params.kappa, co.alpha1, co.alpha2, gap_h, gap_hcal, norm, norm / gap_h**2)


def max_pair_action(problem: IsingProblem, params: AnnealParams, matrices: Optional[GeneratorMatrices] = None) -> float:
    """``max |beta H_{i,j,k}|`` over all states and bonded pair moves (half the action change)."""
    space = StateSpace(problem.n_spins, params.trotter_slices)
    e = matrices.H0_diag if matrices is not None else path_energies(problem, params, space)
    _, double = space.move_masks(problem)
    src = np.arange(space.n_states, dtype=np.int64)
    d = e[src[None, :] ^ double[:, None]] - e[src[None, :]]
    return float(np.abs(d).max() / 2.0)


@dataclass(frozen=True)
class GapBoundReport:
    gap: float
    max_pair_action: float
    bound: float
    satisfied: bool
    single_branch: float  # N! * w_single^N
    double_branch: float  # (N/2)! * w_double^(N/2)

    @property
    def smaller_branch(self) -> str:
        return "double" if self.double_branch < self.single_branch else "single"


def gap_bound_report(
    matrices: GeneratorMatrices, problem: IsingProblem, params: AnnealParams, a_const: float, c_const: float
) -> GapBoundReport:
    """Compare the measured gap with ``a sqrt(N) 2^(-N/2) exp(-N |beta H_ijk| / 2 - c N)``.

    The constants are hypotheses supplied by the caller; the report never raises
    on a violated bound. The two rate branches use the smallest single-flip and
    pair-flip symmetric rates ``w`` over all states.
    """
    n = problem.n_spins
    gap = spectral_gap(matrices)
    hmax = max_pair_action(problem, params, matrices)
    bound = a_const * math.sqrt(n) / 2 ** (n / 2) * math.exp(-n * hmax / 2.0 - c_const * n)
    space = StateSpace(n, params.trotter_slices)
    single, double = space.move_masks(problem)
    e = matrices.H0_diag
    src = np.arange(space.n_states, dtype=np.int64)

    def w_min(masks):
        d = e[src[None, :] ^ masks[:, None]] - e[src[None, :]]
        x = np.exp(-np.abs(d) / 2.0)
        return float((x / (1.0 + x * x)).min())

    w1, w2 = w_min(single), w_min(double)
    single_branch = math.exp(math.lgamma(n + 1) + n * math.log(w1))
    double_branch = math.exp(math.lgamma(n / 2 + 1) + (n / 2) * math.log(w2))
    return GapBoundReport(gap, hmax, bound, gap >= bound, single_branch, double_branch)


def evolve(matrices: GeneratorMatrices, p0: np.ndarray, duration: float) -> np.ndarray:
    """Solve dP/dt = W P for a frozen generator over ``duration``."""
    return scipy.sparse.linalg.expm_multiply(matrices.W * duration, np.asarray(p0, dtype=float))


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
