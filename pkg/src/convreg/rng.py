"""Deterministic cross-platform pseudo-random normal generator.

Kernel initializations must be reproducible from a single integer seed,
independent of numpy version or platform.  The generator is fully pinned:

* state advance: splitmix64 (Vigna's reference constants)
      state += 0x9E3779B97F4A7C15          (mod 2^64)
      z = state
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
      z = (z ^ (z >> 27)) * 0x94D049BB133111EB
      output z ^ (z >> 31)
* uniform mapping: u = ((output >> 11) + 1) * 2^-53, so u is in (0, 1]
* normal transform: Box-Muller,
      z1 = sqrt(-2 ln u1) * cos(2 pi u2)
      z2 = sqrt(-2 ln u1) * sin(2 pi u2)
  with the pair (z1, z2) emitted in that order.
"""

from __future__ import annotations

import math

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(state: int) -> tuple[int, int]:
    """Advance one splitmix64 step; returns (new_state, 64-bit output)."""
    state = (state + _GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return state, z ^ (z >> 31)


class SeededGaussian:
    """Stream of standard-normal doubles, reproducible from an integer seed.

    Identical seeds yield identical streams on every platform; the
    generator never consults global state.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._state = seed & _MASK64
        self._spare: float | None = None

    def _uniform(self) -> float:
        # (0, 1]: the +1 keeps log() finite at the bottom end.
        self._state, bits = splitmix64(self._state)
        return ((bits >> 11) + 1) * 2.0 ** -53

    def normal(self) -> float:
        """Next standard-normal variate."""
        if self._spare is not None:
            z = self._spare
            self._spare = None
            return z
        u1 = self._uniform()
        u2 = self._uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def normals(self, n: int) -> list[float]:
        """List of the next ``n`` standard-normal variates."""
        return [self.normal() for _ in range(n)]
