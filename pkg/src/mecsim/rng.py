"""Splittable seeded RNG streams.

One root seed, one child stream per key tuple. Keys may be ints or strings
(strings are hashed with crc32 so the mapping is stable across runs and
platforms). Parallel and serial execution therefore see identical streams.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    if isinstance(key, float):
        # floats appear as sweep values; use their exact bit pattern
        return zlib.crc32(np.float64(key).tobytes())
    raise TypeError(f"unsupported stream key: {key!r}")


def stream(root_seed: int, *keys) -> np.random.Generator:
    """Child generator for (root_seed, *keys), independent of creation order."""
    spawn = tuple(_key_to_int(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(root_seed, spawn_key=spawn))
