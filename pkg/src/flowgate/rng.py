"""Portable deterministic randomness for the split protocol.

The split protocol must produce identical subsets on any platform and any
library version, so it cannot lean on a third-party RNG. This module pins
SplitMix64 (Steele et al.'s mix function, the JDK splittable-seed expander)
plus FNV-1a for deriving per-class streams, and a Fisher-Yates shuffle whose
swap targets are `u mod (i+1)`. The modulo bias at 64 bits is below 2**-40
and is accepted in exchange for a fixed, data-independent draw count.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(text: str) -> int:
    """64-bit FNV-1a hash of the UTF-8 encoding of `text`."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """SplitMix64 generator; the i-th output is a pure function of seed + i*gamma."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return _mix(self._state)

    def fill_u64(self, n: int) -> np.ndarray:
        """Vectorized batch of the next `n` outputs (advances the stream)."""
        start = self._state
        self._state = (start + n * _GAMMA) & _MASK64
        z = (np.uint64(start) + np.uint64(_GAMMA) * np.arange(1, n + 1, dtype=np.uint64))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    def below(self, n: int) -> int:
        """Draw from [0, n) as next_u64() mod n."""
        if n <= 0:
            raise ValueError("below() requires n >= 1")
        return self.next_u64() % n


def class_stream(seed: int, name: str) -> SplitMix64:
    """Per-class generator: SplitMix64 seeded with seed XOR fnv1a64(name)."""
    return SplitMix64((seed & _MASK64) ^ fnv1a64(name))


def fisher_yates(items: list, rng: SplitMix64) -> None:
    """In-place Fisher-Yates shuffle of `items` driven by `rng`.

    Consumes exactly len(items) - 1 draws, high index down to 1, so the
    permutation depends only on (seed, len); list contents never feed back
    into the stream.
    """
    n = len(items)
    if n < 2:
        return
    sizes = np.arange(n, 1, -1, dtype=np.uint64)
    draws = rng.fill_u64(n - 1) % sizes
    for t, i in enumerate(range(n - 1, 0, -1)):
        j = int(draws[t])
        items[i], items[j] = items[j], items[i]
