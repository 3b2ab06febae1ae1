"""Counter-based RNG streams.

Every stochastic routine in the package takes an explicit (seed, stream)
pair and builds its generator here, so results are reproducible across
runs, worker counts, and scheduling order.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    # SplitMix64 finalizer; good avalanche, cheap, stable across platforms.
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_key(seed: int, *stream_ids: int) -> tuple[int, int]:
    """Mix a base seed and any number of stream ids into a Philox key."""
    h = _splitmix64(seed & _MASK64)
    for sid in stream_ids:
        h = _splitmix64(h ^ _splitmix64(sid & _MASK64))
    return h, _splitmix64(h)


def stream(seed: int, *stream_ids: int) -> np.random.Generator:
    """Independent generator for (seed, stream_ids).

    Streams with distinct ids are statistically independent; the same
    (seed, ids) always yields the identical sequence.
    """
    k0, k1 = derive_key(seed, *stream_ids)
    return np.random.Generator(np.random.Philox(key=np.array([k0, k1], dtype=np.uint64)))
