"""Deterministic 64-bit pseudo-random generator used for every random choice.

The generator is xorshift64* : the state is advanced with the shift triple
(12, 25, 27) and the output is the state multiplied by 0x2545F4914F6CDD1D,
truncated to 64 bits.  Integer seeds are scrambled through one round of the
splitmix64 finalizer so that small consecutive seeds give unrelated streams;
a scrambled value of zero (illegal for xorshift) is replaced with the
golden-ratio constant 0x9E3779B97F4A7C15.

Derived draws are pinned too, so any faithful reimplementation of this file
reproduces shuffles, splits, weight initializations and search traces bit
for bit:

* uniform doubles take the top 53 bits of the next output, divided by 2**53
  (values in [0, 1));
* bounded integers use rejection sampling on the raw 64-bit output, so every
  residue is exactly equally likely;
* ``shuffle`` is a Fisher-Yates pass from the last index down to 1;
* ``sample_indices`` is a partial Fisher-Yates over ``range(n)`` returning
  the first k slots in ascending order.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_MULTIPLIER = 0x2545F4914F6CDD1D
_GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 2.0 ** -53


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class XorShift64Star:
    """Sequential xorshift64* stream seeded from a Python integer."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = _splitmix64(seed & _MASK64) or _GOLDEN

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x = (x ^ (x << 25)) & _MASK64
        x ^= x >> 27
        self._state = x
        return (x * _MULTIPLIER) & _MASK64

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * _INV_2_53

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError(f"randrange bound must be positive, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def randint(self, low: int, high: int) -> int:
        """Uniform integer in the inclusive range [low, high]."""
        if high < low:
            raise ValueError(f"empty range [{low}, {high}]")
        return low + self.randrange(high - low + 1)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle (descending index order)."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample_indices(self, n: int, k: int) -> tuple[int, ...]:
        """Uniform k-subset of range(n), returned ascending."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} indices from range({n})")
        pool = list(range(n))
        for i in range(k):
            j = i + self.randrange(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return tuple(sorted(pool[:k]))

    def uniform_block(self, count: int) -> np.ndarray:
        """float64 array of `count` sequential uniform [0, 1) draws."""
        x = self._state
        out = np.empty(count, dtype=np.float64)
        for i in range(count):
            x ^= x >> 12
            x = (x ^ (x << 25)) & _MASK64
            x ^= x >> 27
            out[i] = (((x * _MULTIPLIER) & _MASK64) >> 11) * _INV_2_53
        self._state = x
        return out
