"""Counter-based random streams keyed by integer coordinates.

A stream for ``(seed, *key)`` does not depend on which other streams were
created before it, so results do not depend on evaluation order.
"""

from __future__ import annotations

import zlib

import numpy as np


def _word(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream keys must be non-negative")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def stream(seed: int, *key) -> np.random.Generator:
    """Independent generator for the coordinates ``key`` under ``seed``."""
    words = [_word(seed), *(_word(k) for k in key)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


def derive_seed(seed: int, *key) -> int:
    """A 63-bit integer seed for the coordinates ``key`` under ``seed``."""
    words = [_word(seed), *(_word(k) for k in key)]
    return int(np.random.SeedSequence(words).generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))
