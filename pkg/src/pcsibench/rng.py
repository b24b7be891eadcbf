"""Counter-based SplitMix64 streams.

Value ``i`` of a stream is ``mix(key + (i + 1) * GOLDEN)``, so any element
can be computed independently and the output does not depend on numpy's
generator internals. Used wherever output must be reproducible from the
seed alone (the synthetic cohort, seed derivation, tree feature keys).
"""

from __future__ import annotations

import hashlib

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def mix64(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def mix64_int(value: int) -> int:
    return int(mix64(np.array([value & _MASK], dtype=np.uint64))[0])


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary printable parts."""
    text = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(text).digest()[:8], "little") >> 1


def name_key(name: str) -> int:
    """Stable 64-bit key for a feature name."""
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "little")


class CounterStream:
    """Sequential reader over a SplitMix64 counter stream."""

    def __init__(self, seed: int, stream: str = ""):
        self.key = np.uint64(derive_seed("splitmix", seed, stream) & _MASK)
        self.counter = 0

    def bits(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return mix64(self.key + idx * GOLDEN)

    def uniform(self, n: int) -> np.ndarray:
        """Doubles in [0, 1) with 53 random bits."""
        return (self.bits(n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))

    def normal(self, n: int) -> np.ndarray:
        """Standard normals by Box-Muller; consumes ``2 n`` values."""
        u1 = self.uniform(n)
        u2 = self.uniform(n)
        return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)

    def choice(self, n: int, probs) -> np.ndarray:
        """Indices drawn from the discrete distribution ``probs``."""
        cdf = np.cumsum(np.asarray(probs, dtype=np.float64))
        cdf /= cdf[-1]
        return np.minimum(np.searchsorted(cdf, self.uniform(n), side="right"), len(cdf) - 1)

    def integers(self, n: int, low: int, high: int) -> np.ndarray:
        """Integers in ``[low, high]`` inclusive."""
        span = high - low + 1
        return low + np.floor(self.uniform(n) * span).astype(np.int64)
