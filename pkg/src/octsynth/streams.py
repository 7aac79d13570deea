"""Deterministic, counter-based random streams.

Every stochastic stage of the generator draws from a stream addressed by a
64-bit key, and keys are derived by hashing structured coordinates such as
(root seed, sample id, column id, photon index).  Because the i-th variate of
a stream depends only on (key, i), results are independent of execution
order, worker count, and resume history.

The mixing function is the SplitMix64 finalizer; streams enumerate the
finalizer over the Weyl sequence key + i * GOLDEN_GAMMA.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_DERIVE_INIT = 0x6A09E667F3BCC909  # fractional bits of sqrt(2)


def mix64(x: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer."""
    z = x & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Hash any number of integer coordinates into one 64-bit stream key.

    The chain is order-sensitive: derive_seed(a, b) != derive_seed(b, a)
    in general.  Negative inputs are folded into the 64-bit ring.
    """
    h = _DERIVE_INIT
    for p in parts:
        h = mix64(h ^ mix64((int(p) + GOLDEN_GAMMA) & _MASK64))
    return h


def _bits_to_unit(z: np.ndarray | int):
    # top 53 bits, shifted into the open interval (0, 1)
    if isinstance(z, np.ndarray):
        return (np.float64(z >> np.uint64(11)) + 0.5) * 2.0**-53
    return (float(z >> 11) + 0.5) * 2.0**-53


def uniforms(key: int, n: int, offset: int = 0) -> np.ndarray:
    """Variates offset..offset+n-1 of the stream, as float64 in (0, 1)."""
    idx = np.arange(offset + 1, offset + n + 1, dtype=np.uint64)
    state = np.uint64(key & _MASK64) + idx * np.uint64(GOLDEN_GAMMA)
    z = (state ^ (state >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return _bits_to_unit(z)


class UniformStream:
    """Stateful cursor over the counter-based stream for key."""

    def __init__(self, key: int):
        self.key = key & _MASK64
        self.counter = 0

    def next(self) -> float:
        self.counter += 1
        return _bits_to_unit(mix64((self.key + self.counter * GOLDEN_GAMMA) & _MASK64))

    def next_in(self, lo: float, hi: float) -> float:
        """Uniform draw on [lo, hi]; degenerate lo == hi returns lo exactly."""
        if hi < lo:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        if hi == lo:
            self.counter += 1  # keep the cursor advancing uniformly
            return lo
        return lo + (hi - lo) * self.next()

    def draw(self, n: int) -> np.ndarray:
        out = uniforms(self.key, n, offset=self.counter)
        self.counter += n
        return out
