"""Deterministic, splittable random streams.

Every stochastic operation in the package takes an explicit RngStream, so
identical seeds reproduce identical runs bit for bit.  Child streams are
derived from a parent seed and an index, which makes per-trial results
independent of how many trials run and in which order.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    """One round of the splitmix64 mixer (used only to derive child seeds)."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


class RngStream:
    """A seeded stream of random draws.

    The same seed always yields the same sample sequence.  Use `split` to
    derive statistically independent child streams; splitting does not
    advance or disturb the parent stream.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def standard_normal(self) -> float:
        return float(self._gen.standard_normal())

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        return float(self._gen.uniform(low, high))

    def split(self, index: int) -> "RngStream":
        """Child stream number `index`; a pure function of (seed, index)."""
        child = _splitmix64(self.seed ^ _splitmix64((int(index) + 1) & _MASK64))
        return RngStream(child)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed})"
