"""SplitMix64 and the sample-selection routine built on it.

Selection must be reproducible from the seed alone in any language, so it
does not go through numpy's generators. The algorithm, in full:

* state advances by ``0x9E3779B97F4A7C15`` (mod 2**64); output is the
  standard SplitMix64 finalizer (shifts 30/27/31, multipliers
  ``0xBF58476D1CE4E5B9`` and ``0x94D049BB133111EB``);
* ``below(n)`` draws uniform integers in ``[0, n)`` by rejection: with
  ``limit = 2**64 - (2**64 % n)``, discard outputs ``>= limit`` and return
  ``x % n``;
* ``sample_indices(n, m, seed)`` runs the first ``m`` steps of a forward
  Fisher-Yates shuffle of ``0..n-1`` (step ``i`` swaps ``i`` with
  ``i + below(n - i)``) and returns the first ``m`` entries sorted.
"""
from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n


def sample_indices(n: int, m: int, seed: int) -> np.ndarray:
    """Choose ``m`` of ``range(n)`` uniformly without replacement, sorted."""
    if not 0 <= m <= n:
        raise ValueError(f"cannot draw {m} of {n}")
    rng = SplitMix64(seed)
    perm = list(range(n))
    for i in range(m):
        j = i + rng.below(n - i)
        perm[i], perm[j] = perm[j], perm[i]
    return np.array(sorted(perm[:m]), dtype=np.int64)
