"""Seed handling shared by every stochastic operation.

All randomness flows through numpy's PCG64 bit generator. A 64-bit integer seed
is turned into a generator with :func:`make_rng`; child seeds are derived with
:func:`mix_seed`, ``seed XOR splitmix64(index)``, so that sub-streams depend only
on the parent seed and a stable index (never on call order or wall clock).
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One round of the SplitMix64 finalizer (Steele, Lea, Flood 2014)."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix_seed(seed: int, index: int) -> int:
    return (int(seed) & MASK64) ^ splitmix64(int(index) & MASK64)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))
