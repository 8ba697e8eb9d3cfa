"""Deterministic, platform-independent random numbers.

Every sampling API in this package draws from SplitMix64, a 64-bit
shift/multiply-xor generator whose update rule is fully documented here so
that identical seeds produce identical streams on any platform, and so the
streams can be re-derived from the seed alone by external tooling.

Update rule (all arithmetic mod 2**64):

    state   <- state + 0x9E3779B97F4A7C15
    z       <- state
    z       <- (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9
    z       <- (z XOR (z >> 27)) * 0x94D049BB133111EB
    output  <- z XOR (z >> 31)

Derived quantities:

    random():           u = (next_u64() >> 11) + 1, return u * 2**-53,
                        a double in (0, 1].
    uniform(lo, hi):    lo + (hi - lo) * random()
    normal(mu, sd):     Box-Muller, one call consumes exactly two random()
                        draws u1, u2 and returns
                        mu + sd * sqrt(-2 ln u1) * cos(2 pi u2).
                        No spare value is cached.
    truncated_normal:   rejection on normal() until the draw lands in
                        [lo, hi].
    randbelow(n):       unbiased rejection on next_u64().

Array fills are row-major in the natural loop order.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_TWO_PI = 2.0 * math.pi


def _scramble(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *parts: int) -> int:
    """Mix task indices into a master seed.

    Each part is folded in through the SplitMix64 scrambler, so distinct
    (seed, parts) tuples map to well-separated child seeds. Used to give
    every (layer, head, purpose) task its own stream without any shared
    mutable generator state.
    """
    x = seed & _MASK64
    for p in parts:
        x = _scramble((x ^ ((p & _MASK64) * _GOLDEN)) & _MASK64)
    return x


class SplitMix64:
    """Sequential SplitMix64 stream seeded with a 64-bit integer."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _scramble(self._state)

    def random(self) -> float:
        # 53 significant bits; the +1 keeps 0 out so log() is always safe.
        return ((self.next_u64() >> 11) + 1) * (2.0 ** -53)

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        u1 = self.random()
        u2 = self.random()
        return mean + std * math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)

    def truncated_normal(self, mean: float, std: float, low: float, high: float) -> float:
        if not low < high:
            raise ValueError(f"empty truncation interval [{low}, {high}]")
        while True:
            x = self.normal(mean, std)
            if low <= x <= high:
                return x

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n)."""
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates, from the last element down."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def uniform_array(self, shape, low: float, high: float) -> np.ndarray:
        out = np.empty(shape, dtype=np.float64)
        flat = out.reshape(-1)
        for i in range(flat.size):
            flat[i] = self.uniform(low, high)
        return out

    def normal_array(self, shape, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        out = np.empty(shape, dtype=np.float64)
        flat = out.reshape(-1)
        for i in range(flat.size):
            flat[i] = self.normal(mean, std)
        return out

    def truncated_normal_array(
        self, shape, mean: float, std: float, low: float, high: float
    ) -> np.ndarray:
        out = np.empty(shape, dtype=np.float64)
        flat = out.reshape(-1)
        for i in range(flat.size):
            flat[i] = self.truncated_normal(mean, std, low, high)
        return out
