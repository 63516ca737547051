"""Counter-based random streams (Philox) keyed by (seed, replica).

Every replica owns one Philox stream. Within it, draws are laid out
sequentially: the initial path first, then a fixed-size block per sweep, so
the uniforms of any sweep can be regenerated directly with :func:`stream_at`.
"""

from __future__ import annotations

import numpy as np

_DRAWS_PER_COUNTER = 4  # Philox4x64 yields four 64-bit words per counter step

MASK64 = (1 << 64) - 1


def _key(seed: int, replica: int) -> list[int]:
    if not (0 <= seed <= MASK64):
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if not (0 <= replica <= MASK64):
        raise ValueError(f"replica index out of range: {replica}")
    return [int(seed), int(replica)]


def replica_stream(seed: int, replica: int) -> np.random.Generator:
    """Generator positioned at the start of the replica's stream."""
    return np.random.Generator(np.random.Philox(key=_key(seed, replica)))


def stream_at(seed: int, replica: int, offset: int) -> np.random.Generator:
    """Generator positioned ``offset`` double draws into the replica's stream."""
    bitgen = np.random.Philox(key=_key(seed, replica))
    blocks, rest = divmod(int(offset), _DRAWS_PER_COUNTER)
    bitgen.advance(blocks)
    gen = np.random.Generator(bitgen)
    if rest:
        gen.random(rest)
    return gen


def sweep_offset(n_sites: int, n_slices: int, n_bonds: int, sweep: int) -> int:
    """Stream offset of the first uniform used by ``sweep``."""
    return n_sites * n_slices + sweep * draws_per_sweep(n_sites, n_slices, n_bonds)


def draws_per_sweep(n_sites: int, n_slices: int, n_bonds: int) -> int:
    return n_slices * (n_sites + n_bonds)
