"""Heat-bath path-integral Monte Carlo with single-spin and bonded pair flips.

A sweep visits every (site, slice) in lexicographic order with a single-flip
proposal, then every (bond, slice) with a same-slice pair-flip proposal. A move
with action change ``d`` (in units of beta*H0) is accepted with probability
``1 / (1 + exp(d))``.

Only these two local move types are used. No cluster or winding moves, so
ergodicity at strong Trotter coupling can be poor in practice.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Optional

import numba as nb
import numpy as np

from .energy import energy
from .model import AnnealParams, IsingProblem, SpinPath
from .rng import draws_per_sweep, replica_stream
from .schedule import AnnealBase, SchedulePolicy, validate
from .trotter import NonStoquasticError, TrotterCoefficients, coefficients

TRACE_COLUMNS = (
    "sweep",
    "t",
    "gamma",
    "kappa",
    "alpha1",
    "alpha2",
    "energy_ising",
    "corr_mean",
    "acc_single",
    "acc_double",
    "replica",
)


@nb.njit(cache=True, inline="always")
def _heat_bath(d):
    if d > 0.0:
        e = math.exp(-d)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(d))


@nb.njit(cache=True)
def _site_part(s, i, k, skip, inc_ptr, inc_bond, bond_i, bond_j, bond_w, alpha2):
    m = s.shape[1]
    kp = (k + 1) % m
    km = (k - 1 + m) % m
    si = s[i, k]
    up = s[i, kp] * si
    dn = si * s[i, km]
    total = 0.0
    for p in range(inc_ptr[i], inc_ptr[i + 1]):
        b = inc_bond[p]
        if b == skip:
            continue
        l = bond_j[b] if bond_i[b] == i else bond_i[b]
        sl = s[l, k]
        total += 2.0 * bond_w[b] * si * sl
        total += 2.0 * alpha2 * (up * s[l, kp] * sl + dn * sl * s[l, km])
    return total, up + dn


@nb.njit(cache=True)
def _sweep_block(s, uniforms, inc_ptr, inc_bond, bond_i, bond_j, bond_w, degree, alpha1, alpha2, state_out, corr_out):
    """Run ``uniforms.shape[0]`` sweeps in place; returns accepted (single, double) counts.

    When ``state_out`` is non-empty the state index after each sweep is stored;
    when ``corr_out`` is non-empty the slice-averaged bond correlators are stored.
    """
    n, m = s.shape
    nb_ = bond_i.shape[0]
    acc_s = 0
    acc_d = 0
    two_b_a1 = 2.0 * degree * alpha1
    for sweep in range(uniforms.shape[0]):
        r = 0
        for i in range(n):
            for k in range(m):
                part, usum = _site_part(s, i, k, -1, inc_ptr, inc_bond, bond_i, bond_j, bond_w, alpha2)
                d = part + two_b_a1 * usum
                if uniforms[sweep, r] < _heat_bath(d):
                    s[i, k] = -s[i, k]
                    acc_s += 1
                r += 1
        for b in range(nb_):
            i = bond_i[b]
            j = bond_j[b]
            for k in range(m):
                pi, ui = _site_part(s, i, k, b, inc_ptr, inc_bond, bond_i, bond_j, bond_w, alpha2)
                pj, uj = _site_part(s, j, k, b, inc_ptr, inc_bond, bond_i, bond_j, bond_w, alpha2)
                d = pi + pj + two_b_a1 * (ui + uj)
                if uniforms[sweep, r] < _heat_bath(d):
                    s[i, k] = -s[i, k]
                    s[j, k] = -s[j, k]
                    acc_d += 1
                r += 1
        if state_out.shape[0] > 0:
            idx = 0
            for i in range(n):
                for k in range(m):
                    idx = idx * 2 + (1 if s[i, k] > 0 else 0)
            state_out[sweep] = idx
        if corr_out.shape[0] > 0:
            for b in range(nb_):
                c = 0.0
                for k in range(m):
                    c += s[bond_i[b], k] * s[bond_j[b], k]
                corr_out[sweep, b] = c / m
    return acc_s, acc_d


class _Lattice:
    """Flat arrays describing a problem, in the layout the kernel expects."""

    def __init__(self, problem: IsingProblem):
        self.problem = problem
        self.bond_i = np.ascontiguousarray(problem.bond_sites[:, 0])
        self.bond_j = np.ascontiguousarray(problem.bond_sites[:, 1])
        self.couplings = problem.couplings
        ptr = [0]
        flat = []
        for bonds in problem.incident:
            flat.extend(bonds)
            ptr.append(len(flat))
        self.inc_ptr = np.array(ptr, dtype=np.int64)
        self.inc_bond = np.array(flat, dtype=np.int64)

    def run(self, spins, uniforms, coeffs: TrotterCoefficients, state_out=None, corr_out=None):
        empty_i = np.empty(0, dtype=np.int64)
        empty_f = np.empty((0, 0), dtype=np.float64)
        return _sweep_block(
            spins,
            uniforms,
            self.inc_ptr,
            self.inc_bond,
            self.bond_i,
            self.bond_j,
            coeffs.beta_over_m * self.couplings,
            float(self.problem.degree),
            float(coeffs.alpha1),
            float(coeffs.alpha2),
            empty_i if state_out is None else state_out,
            empty_f if corr_out is None else corr_out,
        )


@dataclass(frozen=True)
class SweepStats:
    accepted_single: int
    proposed_single: int
    accepted_double: int
    proposed_double: int

    @property
    def single_rate(self) -> float:
        return self.accepted_single / self.proposed_single if self.proposed_single else 0.0

    @property
    def double_rate(self) -> float:
        return self.accepted_double / self.proposed_double if self.proposed_double else 0.0


def _require_sign_free(coeffs: TrotterCoefficients):
    if not coeffs.c2_kernel > 0:
        raise NonStoquasticError(coeffs.margin, coeffs.a, coeffs.b_k)


def sweep(path: SpinPath, problem: IsingProblem, coeffs: TrotterCoefficients, rng: np.random.Generator):
    """One full heat-bath sweep; returns ``(new_path, SweepStats)``."""
    _require_sign_free(coeffs)
    n, m = path.n_sites, path.n_slices
    if n != problem.n_spins:
        raise ValueError("path and problem sizes differ")
    spins = path.spins.copy()
    uniforms = rng.random((1, draws_per_sweep(n, m, problem.n_bonds)))
    acc_s, acc_d = _Lattice(problem).run(spins, uniforms, coeffs)
    return SpinPath(spins), SweepStats(int(acc_s), n * m, int(acc_d), problem.n_bonds * m)


def reference_sweep(spins: np.ndarray, problem: IsingProblem, coeffs: TrotterCoefficients, uniforms: np.ndarray):
    """Pure-Python sweep using :mod:`sqaxx.energy` deltas (slow; for cross-checking the kernel)."""
    from .energy import delta_double, delta_single

    s = np.array(spins, dtype=np.int8)
    n, m = s.shape
    r = acc_s = acc_d = 0
    for i in range(n):
        for k in range(m):
            d = delta_single(s, i, k, problem, coeffs)
            if uniforms[r] < heat_bath_probability(d):
                s[i, k] *= -1
                acc_s += 1
            r += 1
    for i, j, _ in problem.bonds:
        for k in range(m):
            d = delta_double(s, i, j, k, problem, coeffs)
            if uniforms[r] < heat_bath_probability(d):
                s[i, k] *= -1
                s[j, k] *= -1
                acc_d += 1
            r += 1
    return s, acc_s, acc_d


def heat_bath_probability(d: float) -> float:
    """Acceptance probability ``1/(1+exp(d))`` evaluated without overflow."""
    if d > 0.0:
        e = math.exp(-d)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(d))


@dataclass(frozen=True)
class Observables:
    slice_energies: np.ndarray  # target Ising energy of each slice
    correlators: np.ndarray  # slice-averaged s_i s_j per bond
    magnetization: float

    @property
    def corr_mean(self) -> float:
        return float(self.correlators.mean())


def measure(path, problem: IsingProblem) -> Observables:
    """Target-model observables of a path."""
    s = (path.spins if isinstance(path, SpinPath) else np.asarray(path)).astype(np.float64)
    slice_e = problem.classical_energy(s.T)
    bi, bj = problem.bond_sites[:, 0], problem.bond_sites[:, 1]
    corr = (s[bi, :] * s[bj, :]).mean(axis=1)
    return Observables(slice_e, corr, float(s.mean()))


@dataclass(frozen=True)
class RunConfig:
    seed: int
    sweeps: int
    replicas: int = 1
    measure_every: int = 1
    time_per_sweep: float = 1.0
    workers: int = 1

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.measure_every < 1:
            raise ValueError("measure_every must be >= 1")
        if not self.time_per_sweep > 0:
            raise ValueError("time_per_sweep must be positive")


@dataclass(frozen=True)
class TraceRecord:
    sweep: int
    t: float
    gamma: float
    kappa: float
    alpha1: float
    alpha2: float
    energy_ising: float
    corr_mean: float
    acc_single: float
    acc_double: float
    replica: int
    action: float = field(default=float("nan"), compare=False)
    correlators: tuple = field(default=(), compare=False)


@dataclass
class AnnealResult:
    trace: list[TraceRecord]
    final_paths: list[SpinPath]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for rec in self.trace:
            writer.writerow([_fmt(getattr(rec, c)) for c in TRACE_COLUMNS])
        return buf.getvalue()


def _fmt(x):
    return repr(float(x)) if isinstance(x, float) else str(x)


class AnnealAbort(RuntimeError):
    """The schedule left the sign-free region during a run."""

    def __init__(self, sweep_index: int, cause: Exception):
        self.sweep_index = sweep_index
        super().__init__(f"schedule left the sign-free region at sweep {sweep_index}: {cause}")


def _same(p: AnnealParams, q: AnnealParams, rel=1e-12) -> bool:
    return all(math.isclose(x, y, rel_tol=rel, abs_tol=0.0) for x, y in ((p.gamma, q.gamma), (p.kappa, q.kappa)))


def _run_replica(problem: IsingProblem, policy, base: AnnealBase, config: RunConfig, replica: int):
    lattice = _Lattice(problem)
    n, m = problem.n_spins, base.trotter_slices
    per_sweep = draws_per_sweep(n, m, problem.n_bonds)
    rng = replica_stream(config.seed, replica)
    spins = np.where(rng.random((n, m)) < 0.5, -1, 1).astype(np.int8)
    cached_params: Optional[AnnealParams] = None
    coeffs: Optional[TrotterCoefficients] = None
    trace = []
    acc_s = acc_d = 0
    since = 0
    for s_idx in range(config.sweeps):
        t = s_idx * config.time_per_sweep
        params = policy.params_at(base, t)
        if cached_params is None or not _same(params, cached_params):
            try:
                coeffs = coefficients(params, problem.degree)
            except NonStoquasticError as exc:
                raise AnnealAbort(s_idx, exc) from exc
            cached_params = params
        uniforms = rng.random((1, per_sweep))
        a_s, a_d = lattice.run(spins, uniforms, coeffs)
        acc_s += a_s
        acc_d += a_d
        since += 1
        if (s_idx + 1) % config.measure_every == 0 or s_idx == config.sweeps - 1:
            path = SpinPath(spins)
            obs = measure(path, problem)
            trace.append(
                TraceRecord(
                    sweep=s_idx,
                    t=float(t),
                    gamma=float(params.gamma),
                    kappa=float(params.kappa),
                    alpha1=float(coeffs.alpha1),
                    alpha2=float(coeffs.alpha2),
                    energy_ising=float(obs.slice_energies[0]),
                    corr_mean=obs.corr_mean,
                    acc_single=acc_s / (since * n * m),
                    acc_double=acc_d / (since * problem.n_bonds * m),
                    replica=replica,
                    action=energy(path, problem, coeffs).total,
                    correlators=tuple(float(c) for c in obs.correlators),
                )
            )
            acc_s = acc_d = since = 0
    return trace, SpinPath(spins)


def anneal(
    problem: IsingProblem,
    policy,
    base: AnnealBase,
    config: RunConfig,
    *,
    check_policy: bool = True,
) -> AnnealResult:
    """Run independent replicas along ``policy`` with schedule time ``t = sweep * time_per_sweep``.

    Raises:
        ValueError: if ``check_policy`` and the policy fails validation.
        AnnealAbort: if the parameters leave the sign-free region mid-run.
    """
    if check_policy and isinstance(policy, SchedulePolicy):
        report = validate(policy, problem.n_spins)
        if not report.passed:
            raise ValueError(f"schedule fails convergence conditions {report.failed}")
    if base.degree != problem.degree:
        raise ValueError("base degree does not match the problem")
    replicas = range(config.replicas)
    if config.workers > 1 and config.replicas > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_replica, *zip(*[(problem, policy, base, config, r) for r in replicas])))
    else:
        results = [_run_replica(problem, policy, base, config, r) for r in replicas]
    trace = [rec for tr, _ in results for rec in tr]
    return AnnealResult(trace, [p for _, p in results])


@dataclass
class FrozenSample:
    """Per-sweep record of a fixed-parameter chain."""

    states: np.ndarray  # state index after each sweep
    correlators: np.ndarray  # (sweeps, n_bonds) slice-averaged correlators
    accepted_single: int
    accepted_double: int

    def histogram(self, n_states: int) -> np.ndarray:
        return np.bincount(self.states, minlength=n_states) / len(self.states)


def sample_frozen(
    problem: IsingProblem,
    params: AnnealParams,
    sweeps: int,
    seed: int,
    *,
    replica: int = 0,
    burn_in: int = 1000,
    chunk: int = 20000,
    start: Optional[SpinPath] = None,
) -> FrozenSample:
    """Sample the Trotterized Boltzmann law at fixed parameters, recording every sweep."""
    coeffs = coefficients(params, problem.degree)
    _require_sign_free(coeffs)
    n, m = problem.n_spins, params.trotter_slices
    record_states = n * m <= 62
    lattice = _Lattice(problem)
    per_sweep = draws_per_sweep(n, m, problem.n_bonds)
    rng = replica_stream(seed, replica)
    init = rng.random((n, m))
    spins = start.spins.copy() if start is not None else np.where(init < 0.5, -1, 1).astype(np.int8)
    done = 0
    while done < burn_in:
        k = min(chunk, burn_in - done)
        lattice.run(spins, rng.random((k, per_sweep)), coeffs)
        done += k
    states = np.empty(sweeps if record_states else 0, dtype=np.int64)
    corr = np.empty((sweeps, problem.n_bonds), dtype=np.float64)
    acc_s = acc_d = 0
    done = 0
    while done < sweeps:
        k = min(chunk, sweeps - done)
        st = states[done : done + k] if record_states else None
        a_s, a_d = lattice.run(spins, rng.random((k, per_sweep)), coeffs, st, corr[done : done + k])
        acc_s += a_s
        acc_d += a_d
        done += k
    return FrozenSample(states, corr, int(acc_s), int(acc_d))


def batch_mean_error(x: np.ndarray, n_batches: int = 50) -> tuple[float, float]:
    """Mean and batch-means standard error of a correlated series."""
    x = np.asarray(x, dtype=float)
    usable = len(x) - len(x) % n_batches
    batches = x[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(x.mean()), float(batches.std(ddof=1) / math.sqrt(n_batches))


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("SQAXX_WORKERS", "1")))
    except ValueError:
        return 1
