"""xoshiro256** generator seeded through SplitMix64.

The generator identity is part of the reproducibility contract: run
manifests and checkpoints record ``RNG_NAME`` together with the raw state.
The state is a ``uint64[4]`` array so the numba kernel can advance it in
place.
"""

from __future__ import annotations

import numpy as np
from numba import njit

RNG_NAME = "xoshiro256**/splitmix64"

MASK64 = (1 << 64) - 1


def splitmix64(x: int):
    """One SplitMix64 step; returns (next internal state, output)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, z ^ (z >> 31)


def seed_state(seed: int) -> np.ndarray:
    x = seed & MASK64
    words = []
    for _ in range(4):
        x, out = splitmix64(x)
        words.append(out)
    if not any(words):
        words[0] = 1
    return np.array(words, dtype=np.uint64)


def derive_seed(seed: int, index: int) -> int:
    """Independent child seed number ``index`` of ``seed`` (for parallel jobs)."""
    x = seed & MASK64
    out = 0
    for _ in range(index + 1):
        x, out = splitmix64(x ^ 0xD1B54A32D192ED03)
    return out


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True)
def next_u64(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True)
def rand_below(s, n):
    """Uniform integer in [0, n) by rejection of the biased low range."""
    bound = np.uint64(n)
    limit = (np.uint64(0) - bound) % bound
    while True:
        x = next_u64(s)
        if x >= limit:
            return np.int64(x % bound)


class Xoshiro256:
    """Thin Python handle around a kernel-compatible generator state."""

    name = RNG_NAME

    def __init__(self, seed: int = 0, state=None):
        self.state = seed_state(seed) if state is None else np.array(state, dtype=np.uint64)
        if self.state.shape != (4,) or not self.state.any():
            raise ValueError("xoshiro256 state must be four words, not all zero")

    def next_u64(self) -> int:
        return int(next_u64(self.state))

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("upper bound must be positive")
        return int(rand_below(self.state, n))

    def getstate(self):
        return [int(w) for w in self.state]

    def setstate(self, words) -> None:
        self.state[:] = np.array(words, dtype=np.uint64)
