"""Deterministic seed derivation and shuffling.

Every sample's randomness flows from a single 64-bit value derived from
(global_seed, sample_index) through an avalanche mix, so reordering or
parallelising sample production never changes any sample's content.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def mix64(x: int) -> int:
    """splitmix64 finalizer: bijective avalanche mix on 64-bit ints."""
    x &= _MASK64
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def derive_seed(global_seed: int, sample_index: int) -> int:
    """Per-sample 64-bit seed.

    Mixes the index through a splitmix64 round keyed by the global seed.
    Distinct (seed, index) pairs collide only if splitmix64 does.
    """
    if sample_index < 0:
        raise ValueError(f"sample_index must be >= 0, got {sample_index}")
    return mix64((global_seed & _MASK64) + 0x9E3779B97F4A7C15 * (sample_index + 1))


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & _MASK64))


def derive_rng(global_seed: int, sample_index: int) -> np.random.Generator:
    return rng_from_seed(derive_seed(global_seed, sample_index))


def fisher_yates(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform random permutation of range(n), backward Fisher-Yates.

    Spelled out rather than delegating to rng.permutation so the draw
    sequence is pinned by this code, not by numpy internals that may
    change between releases.
    """
    perm = np.arange(n, dtype=np.int64)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return perm
