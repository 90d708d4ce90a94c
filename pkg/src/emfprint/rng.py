"""Portable counter-based SplitMix64 generator.

Every draw is a pure function of ``(seed, counter)``, so streams can be
reproduced in any language with 64-bit unsigned arithmetic:

    z = seed + (counter + 1) * 0x9E3779B97F4A7C15      (mod 2**64)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    out = z ^ (z >> 31)

Uniform doubles take the top 53 bits: ``(out >> 11) * 2**-53`` in [0, 1).
Normal deviates use Box-Muller on consecutive pairs ``(u1, u2)`` with
``u1 = ((out >> 11) + 1) * 2**-53`` in (0, 1]:
``sqrt(-2 ln u1) * cos(2 pi u2)`` and ``sqrt(-2 ln u1) * sin(2 pi u2)``.
A child stream for integer key ``k`` has seed ``mix(seed ^ mix(k))`` where
``mix`` is the finalizer above applied to ``k + 0x9E3779B97F4A7C15``.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def _finalize(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def mix64(value: int) -> int:
    """SplitMix64 finalizer of ``value + golden`` as a Python int."""
    z = np.array([(value + 0x9E3779B97F4A7C15) & _MASK], dtype=np.uint64)
    return int(_finalize(z)[0])


class SplitMix64:
    """Stateful cursor over a SplitMix64 stream.

    Draw methods advance an internal counter; ``spawn`` derives independent
    child streams without touching the parent's counter.
    """

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & _MASK
        self.counter = int(counter)

    def spawn(self, *keys: int) -> "SplitMix64":
        seed = self.seed
        for key in keys:
            seed = mix64(seed ^ mix64(int(key) & _MASK))
        return SplitMix64(seed)

    def uint64(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + idx * _GOLDEN
            return _finalize(z)

    def random(self, n: int) -> np.ndarray:
        return (self.uint64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def uniform(self, low: float, high: float, n: int) -> np.ndarray:
        return low + (high - low) * self.random(n)

    def normal(self, n: int) -> np.ndarray:
        pairs = (n + 1) // 2
        raw = self.uint64(2 * pairs) >> np.uint64(11)
        u1 = (raw[0::2].astype(np.float64) + 1.0) * 2.0**-53
        u2 = raw[1::2].astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def permutation(self, n: int) -> np.ndarray:
        """Random permutation of ``range(n)`` by sorting fresh 64-bit keys."""
        return np.argsort(self.uint64(n), kind="stable")
