"""Problem, parameter and path representations shared across the package."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np


class ProblemError(ValueError):
    """Raised for malformed Ising instances (irregular graphs, duplicate bonds, ...)."""


@dataclass(frozen=True)
class IsingProblem:
    """Classical target instance ``H = -sum_<ij> J_ij s_i s_j`` on a regular graph.

    Attributes:
        n_spins: number of sites N.
        bonds: tuple of ``(i, j, J_ij)`` with ``i < j``.
        degree: uniform vertex degree b of the bond graph.
    """

    n_spins: int
    bonds: tuple[tuple[int, int, float], ...]
    degree: int

    def __post_init__(self):
        if self.n_spins < 2:
            raise ProblemError(f"need at least 2 spins, got {self.n_spins}")
        seen = set()
        counts = Counter()
        for i, j, _ in self.bonds:
            if i == j:
                raise ProblemError(f"self-loop on vertex {i}")
            if not (0 <= i < j < self.n_spins):
                raise ProblemError(f"bond ({i}, {j}) out of range or not ordered i<j")
            if (i, j) in seen:
                raise ProblemError(f"duplicate bond ({i}, {j})")
            seen.add((i, j))
            counts[i] += 1
            counts[j] += 1
        degrees = [counts[v] for v in range(self.n_spins)]
        if any(d != self.degree for d in degrees) or self.degree < 1:
            raise ProblemError(_irregular_message(degrees))

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    @cached_property
    def bond_sites(self) -> np.ndarray:
        """(n_bonds, 2) int64 array of bond endpoints."""
        return np.array([(i, j) for i, j, _ in self.bonds], dtype=np.int64).reshape(-1, 2)

    @cached_property
    def couplings(self) -> np.ndarray:
        return np.array([J for _, _, J in self.bonds], dtype=np.float64)

    @cached_property
    def incident(self) -> tuple[tuple[int, ...], ...]:
        """For each site, the indices of the bonds touching it (in bond order)."""
        out: list[list[int]] = [[] for _ in range(self.n_spins)]
        for b, (i, j, _) in enumerate(self.bonds):
            out[i].append(b)
            out[j].append(b)
        return tuple(tuple(x) for x in out)

    @cached_property
    def bond_index(self) -> dict[tuple[int, int], int]:
        return {(i, j): b for b, (i, j, _) in enumerate(self.bonds)}

    def find_bond(self, i: int, j: int) -> int:
        """Index of bond ``<ij>`` (either order); ProblemError if absent."""
        key = (i, j) if i < j else (j, i)
        try:
            return self.bond_index[key]
        except KeyError:
            raise ProblemError(f"({i}, {j}) is not a bond of the problem") from None

    def classical_energy(self, spins: np.ndarray) -> np.ndarray:
        """Target energy ``-sum J s_i s_j`` for spins of shape (..., N)."""
        s = np.asarray(spins, dtype=np.float64)
        bs = self.bond_sites
        return -np.sum(self.couplings * s[..., bs[:, 0]] * s[..., bs[:, 1]], axis=-1)

    def to_dict(self) -> dict:
        return {"n": self.n_spins, "topology": "edge-list", "bonds": [[i, j, J] for i, j, J in self.bonds]}


def _irregular_message(degrees: Sequence[int]) -> str:
    by_degree: dict[int, list[int]] = {}
    for v, d in enumerate(degrees):
        by_degree.setdefault(d, []).append(v)
    if len(by_degree) == 1:
        (d,) = by_degree
        return f"every vertex has degree {d}; need a positive uniform degree"
    # offending vertices are those outside the most common degree class
    majority = max(by_degree, key=lambda d: (len(by_degree[d]), d))
    order = [d for d in sorted(by_degree) if d != majority] + [majority]
    parts = []
    for d in order:
        vs = by_degree[d]
        if len(vs) == 1:
            parts.append(f"vertex {vs[0]} has degree {d}")
        else:
            parts.append(f"vertices {','.join(map(str, vs))} degree {d}")
    return "graph is not regular: " + ", ".join(parts)


def build_problem(n: int, topology: str = "edge-list", couplings=1.0) -> IsingProblem:
    """Build and validate an :class:`IsingProblem`.

    Args:
        n: number of spins.
        topology: ``"ring"``, ``"complete"`` or ``"edge-list"``.
        couplings: for ``ring``/``complete`` a scalar J or one J per generated bond;
            for ``edge-list`` a sequence of ``(i, j, J)`` triples.
    """
    if topology == "edge-list":
        raw = []
        for bond in couplings:
            if len(bond) != 3:
                raise ProblemError(f"edge-list bonds must be (i, j, J) triples, got {bond!r}")
            i, j, J = bond
            raw.append((int(i), int(j), float(J)))
    else:
        if topology == "ring":
            if n < 3:
                raise ProblemError("a ring needs n >= 3; use an edge list for a single bond")
            pairs = [(k, (k + 1) % n) for k in range(n)]
        elif topology == "complete":
            pairs = list(combinations(range(n), 2))
        else:
            raise ProblemError(f"unknown topology {topology!r}")
        if np.ndim(couplings) == 0:
            js = [float(couplings)] * len(pairs)
        else:
            js = [float(J) for J in couplings]
            if len(js) != len(pairs):
                raise ProblemError(f"{topology} on {n} sites has {len(pairs)} bonds, got {len(js)} couplings")
        raw = [(i, j, J) for (i, j), J in zip(pairs, js)]
    bonds = tuple(sorted(((min(i, j), max(i, j), J) for i, j, J in raw), key=lambda b: (b[0], b[1])))
    for i, j, _ in bonds:
        if i == j:
            raise ProblemError(f"self-loop on vertex {i}")
    counts = Counter()
    for i, j, _ in bonds:
        counts[i] += 1
        counts[j] += 1
    degree = counts.most_common(1)[0][1] if counts else 0
    return IsingProblem(n_spins=int(n), bonds=bonds, degree=degree)


def problem_from_dict(data: dict) -> IsingProblem:
    n = int(data["n"])
    topology = data.get("topology", "edge-list")
    if topology == "edge-list":
        return build_problem(n, "edge-list", data["bonds"])
    return build_problem(n, topology, data.get("J", 1.0))


def load_problem(path: str | Path) -> IsingProblem:
    return problem_from_dict(json.loads(Path(path).read_text()))


def save_problem(problem: IsingProblem, path: str | Path) -> None:
    Path(path).write_text(json.dumps(problem.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class AnnealParams:
    """Instantaneous parameters (beta, M, Gamma, K) of one Trotterized system."""

    beta: float
    trotter_slices: int
    gamma: float
    kappa: float

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be finite and positive, got {self.beta}")
        if int(self.trotter_slices) != self.trotter_slices or self.trotter_slices < 2:
            raise ValueError(f"trotter_slices must be an integer >= 2, got {self.trotter_slices}")
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise ValueError(f"kappa must be finite and >= 0, got {self.kappa}")

    @property
    def beta_over_m(self) -> float:
        return self.beta / self.trotter_slices


class SpinPath:
    """Immutable N x M array of +-1 spins, periodic along the Trotter axis.

    ``spins[i, k]`` is site i on slice k. The state-index bijection flattens
    row-major (site-major, slice-minor) with the first entry as the most
    significant bit and maps -1 -> 0, +1 -> 1.
    """

    __slots__ = ("_spins",)

    def __init__(self, spins):
        arr = np.array(spins, dtype=np.int8)
        if arr.ndim != 2:
            raise ValueError(f"spin path must be 2-D (N, M), got shape {arr.shape}")
        if not np.all((arr == 1) | (arr == -1)):
            raise ValueError("spins must be +1 or -1")
        arr.flags.writeable = False
        self._spins = arr

    @classmethod
    def all_up(cls, n: int, m: int) -> "SpinPath":
        return cls(np.ones((n, m), dtype=np.int8))

    @classmethod
    def random(cls, n: int, m: int, rng: np.random.Generator) -> "SpinPath":
        return cls(rng.choice(np.array([-1, 1], dtype=np.int8), size=(n, m)))

    @classmethod
    def from_index(cls, index: int, n: int, m: int) -> "SpinPath":
        return cls(index_to_spins(np.asarray([index]), n, m)[0])

    @property
    def spins(self) -> np.ndarray:
        return self._spins

    @property
    def n_sites(self) -> int:
        return self._spins.shape[0]

    @property
    def n_slices(self) -> int:
        return self._spins.shape[1]

    def __getitem__(self, key):
        return self._spins[key]

    def flip(self, i: int, k: int) -> "SpinPath":
        arr = self._spins.copy()
        arr[i, k % self.n_slices] *= -1
        return SpinPath(arr)

    def flip_pair(self, i: int, j: int, k: int) -> "SpinPath":
        arr = self._spins.copy()
        k %= self.n_slices
        arr[i, k] *= -1
        arr[j, k] *= -1
        return SpinPath(arr)

    def roll(self, shift: int = 1) -> "SpinPath":
        """Rotate slices k -> k + shift (mod M)."""
        return SpinPath(np.roll(self._spins, shift, axis=1))

    def to_index(self) -> int:
        return int(spins_to_index(self._spins[None])[0])

    def __eq__(self, other):
        return isinstance(other, SpinPath) and np.array_equal(self._spins, other._spins)

    def __hash__(self):
        return hash((self._spins.shape, self._spins.tobytes()))

    def __repr__(self):
        return f"SpinPath(N={self.n_sites}, M={self.n_slices})"

    def to_dict(self) -> dict:
        return {"n": self.n_sites, "m": self.n_slices, "spins": self._spins.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "SpinPath":
        path = cls(data["spins"])
        if path.spins.shape != (int(data["n"]), int(data["m"])):
            raise ValueError("spin array shape does not match n, m")
        return path


def save_path(path: SpinPath, dest: str | Path) -> None:
    Path(dest).write_text(json.dumps(path.to_dict()) + "\n")


def load_path(src: str | Path) -> SpinPath:
    return SpinPath.from_dict(json.loads(Path(src).read_text()))


def spins_to_index(spins: np.ndarray) -> np.ndarray:
    """Map spins of shape (S, N, M) to integer state indices."""
    s = np.asarray(spins)
    flat = s.reshape(s.shape[0], -1)
    nbits = flat.shape[1]
    if nbits > 62:
        raise ValueError("state index only defined for N*M <= 62")
    weights = np.left_shift(np.int64(1), np.arange(nbits - 1, -1, -1, dtype=np.int64))
    return ((flat > 0).astype(np.int64) * weights).sum(axis=1)


def index_to_spins(indices: np.ndarray, n: int, m: int) -> np.ndarray:
    """Inverse of :func:`spins_to_index`; returns int8 array of shape (S, N, M)."""
    idx = np.asarray(indices, dtype=np.int64)
    nbits = n * m
    shifts = np.arange(nbits - 1, -1, -1, dtype=np.int64)
    bits = (idx[:, None] >> shifts) & 1
    return (2 * bits - 1).astype(np.int8).reshape(-1, n, m)
