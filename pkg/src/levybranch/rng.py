"""Counter-based random streams.

Every simulated object (path, CMJ replica, jitter vector) draws from its own
Philox4x64-10 stream.  The stream for ``(seed, index)`` uses key = seed and
starts at counter words (0, 0, 0, index), so streams never overlap for fewer
than 2**192 draws each and can be regenerated in any order.
"""
import hashlib

import numpy as np

RNG_ID = "philox4x64-10/numpy-key=seed/counter=(0,0,0,index)"

_MASK64 = (1 << 64) - 1


def stream(seed: int, index: int = 0) -> np.random.Generator:
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be nonnegative")
    bitgen = np.random.Philox(key=seed & ((1 << 128) - 1), counter=[0, 0, 0, index & _MASK64])
    return np.random.Generator(bitgen)


def derive_seed(seed: int, tag: str) -> int:
    """A child seed for an independent family of streams (stable across runs)."""
    digest = hashlib.sha256(f"{seed}:{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little")
