"""Deterministic counter-based random numbers built on the SplitMix64 mixer.

Every stochastic operation in the package takes an explicit `Rng` (or a seed
it turns into one); there is no global generator state. Streams are
counter-based, so drawing n values then m values yields the same numbers as
drawing n+m at once, and `split` derives statistically independent child
generators from a parent key.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def _mix64(z):
    """SplitMix64 finalizer, vectorized over uint64 arrays."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


class Rng:
    """Splittable counter-based generator producing float64 variates."""

    def __init__(self, seed):
        self._key = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self._counter = 0

    def split(self, index):
        """Derive an independent child generator; same (key, index) -> same child."""
        mask = 0xFFFFFFFFFFFFFFFF
        mixed = int(_mix64(np.array([(int(index) + 0x9E3779B97F4A7C15) & mask], dtype=np.uint64))[0])
        child = int(_mix64(np.array([(int(self._key) ^ mixed) & mask], dtype=np.uint64))[0])
        return Rng(child)

    def _raw(self, n):
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return _mix64(self._key + idx * _GOLDEN)

    def uniform(self, shape=(), low=0.0, high=1.0):
        """Uniform floats in [low, high) with 53-bit resolution."""
        n = int(np.prod(shape)) if shape else 1
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
        out = low + (high - low) * u
        return out.reshape(shape) if shape else float(out[0])

    def normal(self, shape=(), mean=0.0, std=1.0):
        """Standard normal variates via Box-Muller."""
        n = int(np.prod(shape)) if shape else 1
        m = (n + 1) // 2
        u1 = (self._raw(m) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
        u2 = (self._raw(m) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
        u1 = np.maximum(u1, 1e-300)  # log(0) guard
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])[:n]
        out = mean + std * z
        return out.reshape(shape) if shape else float(out[0])

    def integers(self, n, bound):
        """n integers uniform in [0, bound). Modulo reduction; bias is negligible
        for the desk-scale bounds used here (bound << 2**64)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return (self._raw(n) % np.uint64(bound)).astype(np.int64)

    def choice(self, bound):
        """Single integer uniform in [0, bound)."""
        return int(self.integers(1, bound)[0])

    def shuffle_indices(self, n):
        """Deterministic Fisher-Yates permutation of range(n)."""
        idx = np.arange(n)
        draws = self._raw(n)
        for i in range(n - 1, 0, -1):
            j = int(draws[n - 1 - i] % np.uint64(i + 1))
            idx[i], idx[j] = idx[j], idx[i]
        return idx
