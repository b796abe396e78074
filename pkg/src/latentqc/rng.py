"""Seed derivation and reproducible standard-normal draws.

Normal variates come from the Box-Muller transform applied to the double
stream of a Philox-4x64 counter-based generator keyed by a 64-bit seed. Each
double is ``(next_uint64 >> 11) * 2**-53``; the pair ``(u1, u2)`` at positions
``(i, m + i)`` of the stream yields outputs ``2i`` and ``2i + 1``:

    r = sqrt(-2 ln(1 - u1)),  z0 = r cos(2 pi u2),  z1 = r sin(2 pi u2)

where ``m = ceil(n / 2)`` for ``n`` requested values.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(*words: int) -> int:
    """Hash a tuple of integers into a 64-bit seed (numpy ``SeedSequence``)."""
    entropy = [int(w) & _MASK64 for w in words]
    lo, hi = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


def uniform_stream(seed: int, n: int) -> np.ndarray:
    bitgen = np.random.Philox(key=int(seed) & _MASK64)
    return np.random.Generator(bitgen).random(n)


def standard_normal(seed: int, shape) -> np.ndarray:
    """Return a float64 array of i.i.d. N(0, 1) draws, bit-identical per seed."""
    shape = (int(shape),) if np.isscalar(shape) else tuple(int(s) for s in shape)
    n = math.prod(shape)
    m = (n + 1) // 2
    u = uniform_stream(seed, 2 * m)
    radius = np.sqrt(-2.0 * np.log1p(-u[:m]))
    angle = 2.0 * np.pi * u[m:]
    out = np.empty(2 * m)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:n].reshape(shape)
