"""Deterministic seeding helpers.

All sampling in the package goes through counter-based Philox streams so
that a (seed, length) pair regenerates bit-identical draws and a longer
stream extends a shorter one (prefix property).  Concurrent work items
must use seeds derived with :func:`derive_seed`.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(value: int) -> int:
    """One splitmix64 mixing round; maps uint64 -> uint64."""
    z = (int(value) + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(seed: int, index: int) -> int:
    """Seed for work item `index`: base seed XOR a hash of the index."""
    return (int(seed) & _MASK64) ^ splitmix64(index)


def generator(seed: int) -> np.random.Generator:
    """Counter-based generator; the stream depends only on the seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))
