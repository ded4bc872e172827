"""SplitMix64, the seeded generator behind every random choice in experiments.

The recurrence, per draw ``i = 1, 2, ...``::

    z = seed + i * 0x9E3779B97F4A7C15            (mod 2**64)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9     (mod 2**64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB     (mod 2**64)
    z =  z ^ (z >> 31)

Uniform doubles are ``(z >> 11) * 2**-53``.  Draws are computed in closed
form from their position, so a stream can be sliced without replaying it.
"""
from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


class SplitMix64:
    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.position = 0

    def next_u64(self, size: int) -> np.ndarray:
        i = np.arange(self.position + 1, self.position + size + 1, dtype=np.uint64)
        self.position += size
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + i * GOLDEN
            z = (z ^ (z >> np.uint64(30))) * _M1
            z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))

    def uniform(self, size: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        u = (self.next_u64(size) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return low + (high - low) * u

    def integers(self, size: int, high: int) -> np.ndarray:
        """Integers in ``[0, high)`` by multiply-shift on the top 53 bits."""
        return np.floor(self.uniform(size) * high).astype(np.int64)

    def normal(self, size: int) -> np.ndarray:
        """Box-Muller pairs from consecutive uniforms."""
        m = (size + 1) // 2
        u1 = self.uniform(m)
        u2 = self.uniform(m)
        r = np.sqrt(-2.0 * np.log1p(-u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
        return z[:size]
