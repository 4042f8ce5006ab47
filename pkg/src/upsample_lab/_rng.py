"""Portable SplitMix64 generator.

Every random quantity in the package (kernel draws, noise inputs, toy
datasets) comes from this generator so results are bit-identical across
platforms and numpy versions. The stream is counter based: output ``i`` of
seed ``s`` is ``mix(s + (i + 1) * GOLDEN)`` with wrapping 64-bit arithmetic,
which makes it cheap to vectorize.
"""
from __future__ import annotations

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1

_G = np.uint64(GOLDEN)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, index: int) -> int:
    """Deterministic child seed, used for per-layer kernels of a stack."""
    return int(SplitMix64(seed ^ 0x5EED5EED5EED5EED).skip(index).next_u64(1)[0])


class SplitMix64:
    """Vectorized SplitMix64 stream.

    Parameters
    ----------
    seed : int
        Any integer; reduced modulo 2**64.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self._counter = 0

    def skip(self, n: int) -> "SplitMix64":
        self._counter += int(n)
        return self

    def next_u64(self, n: int) -> np.ndarray:
        k = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        state = np.uint64(self.seed) + k * _G
        return _mix(state)

    def random(self, size) -> np.ndarray:
        """Uniform doubles on [0, 1) with 53 random bits each."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape, dtype=np.int64))
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        return u.reshape(shape)

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        return low + (high - low) * self.random(size)

    def normal(self, size) -> np.ndarray:
        """Standard normal draws via Box-Muller."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape, dtype=np.int64))
        m = (n + 1) // 2
        u1 = 1.0 - self.random(m)  # (0, 1]
        u2 = self.random(m)
        rad = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([rad * np.cos(2 * np.pi * u2), rad * np.sin(2 * np.pi * u2)])
        return z[:n].reshape(shape)
