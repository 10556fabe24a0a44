"""Deterministic derivation of per-replication random streams."""

import numpy as np

_GOLDEN = 0x9E3779B97F4A7C15
_MASK = 0xFFFFFFFFFFFFFFFF


def mix_seed(master_seed: int, index: int) -> int:
    """Derive an independent 64-bit stream seed from (master_seed, index).

    splitmix64 finalizer over the golden-ratio sequence; stable across
    platforms and releases, so replication i always sees the same stream.
    """
    z = (master_seed + (index + 1) * _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def stream(master_seed: int, index: int = 0) -> np.random.Generator:
    """PCG64 generator seeded with mix_seed(master_seed, index)."""
    return np.random.Generator(np.random.PCG64(mix_seed(master_seed, index)))
