"""Per-sample random streams.

Every sample draws from its own stream keyed by ``(seed, level, index)``,
so results do not depend on which worker ran the sample or in what order.

Two flavours exist.  ``sample_stream`` hands out a full generator for
models that need many draws.  ``sample_uniforms`` uses the counter-based
Philox generator directly: sample ``i`` owns the 4-word output block at
counter ``i`` under a key derived from ``(seed, level)``, so a whole batch
of consecutive samples is one vectorised call and still gives each sample
exactly the values it would get on its own.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

_MASK64 = 0xFFFF_FFFF_FFFF_FFFF
# spawn-key tags keeping the two flavours on unrelated keys
_STREAM_TAG = 0
_BLOCK_TAG = 1


def sample_stream(seed: int, level: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=(_STREAM_TAG, int(level), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


@lru_cache(maxsize=256)
def _block_key(seed: int, level: int) -> tuple[int, int]:
    ss = np.random.SeedSequence(seed & _MASK64, spawn_key=(_BLOCK_TAG, level))
    a, b = ss.generate_state(2, np.uint64)
    return int(a), int(b)


def sample_blocks(seed: int, level: int, first: int, last: int) -> np.ndarray:
    """Raw 64-bit words, shape ``(last - first + 1, 4)``; row k belongs to sample ``first + k``."""
    n = last - first + 1
    if n <= 0:
        return np.empty((0, 4), dtype=np.uint64)
    key = _block_key(int(seed), int(level))
    bitgen = np.random.Philox(key=np.array(key, dtype=np.uint64), counter=int(first))
    return bitgen.random_raw(4 * n).reshape(n, 4)


def sample_uniforms(seed: int, level: int, first: int, last: int, word: int = 0) -> np.ndarray:
    """One uniform on [0, 1) per sample, 53-bit resolution."""
    raw = sample_blocks(seed, level, first, last)[:, word]
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
