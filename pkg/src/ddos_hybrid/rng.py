"""Deterministic random streams shared by every stochastic step.

All randomness (splits, bootstrap draws, weight init, shuffles, synthetic
data) comes from PCG32 (XSH-RR 64/32, O'Neill 2014) so results depend only
on the seed, never on numpy's global state or platform RNGs.

Constants:
    multiplier  6364136223846793005
    stream      0xda3e39cb94b95bdb  (default increment selector)
    seeding     state=0; inc=(stream<<1)|1; step; state+=seed; step

Seeds for sub-streams (tree t, fold f, ...) are derived with SplitMix64 so
that neighbouring integer seeds give unrelated streams.
"""

from __future__ import annotations

import numpy as np

from ddos_hybrid import _kernels

MASK64 = 0xFFFFFFFFFFFFFFFF
PCG_MULT = 6364136223846793005
PCG_DEFAULT_STREAM = 0xDA3E39CB94B95BDB


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Mix integer keys into a seed: splitmix64 applied once per key."""
    s = seed & MASK64
    for k in keys:
        s = splitmix64((s + (k & MASK64)) & MASK64)
    return s


class Pcg32:
    """PCG32 generator. Bulk draws dispatch to the compiled core when present."""

    def __init__(self, seed: int, stream: int = PCG_DEFAULT_STREAM):
        self.inc = ((stream << 1) | 1) & MASK64
        self.state = 0
        self._step()
        self.state = (self.state + (seed & MASK64)) & MASK64
        self._step()

    def _step(self) -> None:
        self.state = (self.state * PCG_MULT + self.inc) & MASK64

    def next_u32(self) -> int:
        old = self.state
        self._step()
        xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & 0xFFFFFFFF

    def u32(self, n: int) -> np.ndarray:
        out, self.state = _kernels.pcg32_u32(self.state, self.inc, n)
        return out

    def bounded(self, bound: int) -> int:
        """Unbiased integer in [0, bound) by threshold rejection."""
        if bound < 1:
            raise ValueError("bound must be >= 1")
        threshold = ((1 << 32) - bound) % bound
        while True:
            r = self.next_u32()
            if r >= threshold:
                return r % bound

    def bounded_many(self, bounds) -> np.ndarray:
        """One bounded draw per entry of ``bounds``, in order."""
        b = np.ascontiguousarray(bounds, dtype=np.uint32)
        if b.size and int(b.min()) < 1:
            raise ValueError("bounds must be >= 1")
        out, self.state = _kernels.pcg32_bounded(self.state, self.inc, b)
        return out

    def uniform(self, n: int) -> np.ndarray:
        """Doubles in [0, 1) with 53 random bits, two u32 draws each."""
        w = self.u32(2 * n).astype(np.uint64).reshape(n, 2)
        hi = w[:, 0] >> np.uint64(5)
        lo = w[:, 1] >> np.uint64(6)
        return (hi * np.uint64(67108864) + lo).astype(np.float64) / 9007199254740992.0

    def uniform_range(self, low: float, high: float, n: int) -> np.ndarray:
        return low + (high - low) * self.uniform(n)

    def normal(self, n: int) -> np.ndarray:
        """Standard normals by Box-Muller, both branches used."""
        m = (n + 1) // 2
        u = self.uniform(2 * m).reshape(m, 2)
        r = np.sqrt(-2.0 * np.log(1.0 - u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        z = np.empty(2 * m)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:n]

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of 0..n-1 (i from n-1 down to 1, j = bounded(i+1))."""
        perm = np.arange(n, dtype=np.intp)
        if n < 2:
            return perm
        draws = self.bounded_many(np.arange(n, 1, -1))
        _kernels.apply_swaps(perm, draws)
        return perm

    def sample_without_replacement(self, population: int, k: int) -> np.ndarray:
        """First k entries of a partial Fisher-Yates pass over 0..population-1."""
        pool = np.arange(population, dtype=np.intp)
        draws = self.bounded_many(population - np.arange(k))
        for i in range(k):
            j = i + int(draws[i])
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k].copy()
