"""Seeded random streams.

Every random draw in the package comes from numpy's PCG64 generator seeded
through a :class:`numpy.random.SeedSequence` built from a 64-bit base seed
and a tuple of string/integer keys naming the purpose of the stream. The
same (seed, keys) always yields the same stream, independent of call order.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key_entropy(key) -> int:
    if isinstance(key, (int, np.integer)) and not isinstance(key, bool):
        return int(key) & _MASK64
    return zlib.crc32(str(key).encode("utf-8"))


def make_rng(seed: int, *keys) -> np.random.Generator:
    entropy = [int(seed) & _MASK64] + [_key_entropy(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *keys) -> int:
    """A 63-bit integer seed derived from ``seed`` and ``keys``."""
    return int(make_rng(seed, *keys).integers(0, 2**63 - 1))
