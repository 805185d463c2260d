"""Portable counter-based pseudo-random primitives.

The two parties of a reconciliation session must regenerate identical
pseudo-random draws from a shared seed, independent of platform, library
version and evaluation order.  Everything here is therefore built on the
splitmix64 output function with fixed constants; the value of a draw
depends only on (seed, counter), never on call history.

Constants (Steele, Lea & Flood's splitmix64):
    GAMMA = 0x9E3779B97F4A7C15
    MIX1  = 0xBF58476D1CE4B3B9
    MIX2  = 0x94D049BB133111EB
value(seed, i) = mix(mix(seed) + (i + 1) * GAMMA), all arithmetic mod 2^64,
where mix(z) = let z ^= z>>30; z *= MIX1; z ^= z>>27; z *= MIX2; z ^= z>>31.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4B3B9
_MIX2 = 0x94D049BB133111EB


def _mix_scalar(z: int) -> int:
    z &= _MASK
    z ^= z >> 30
    z = (z * _MIX1) & _MASK
    z ^= z >> 27
    z = (z * _MIX2) & _MASK
    z ^= z >> 31
    return z


def _mix_array(z: np.ndarray) -> np.ndarray:
    # uint64 arithmetic wraps mod 2^64, matching the scalar path
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX2)
    z ^= z >> np.uint64(31)
    return z


def counter_values(seed: int, counters: np.ndarray) -> np.ndarray:
    """64-bit pseudo-random words for the given counters under `seed`."""
    base = np.uint64(_mix_scalar(seed))
    ctr = counters.astype(np.uint64, copy=False)
    z = base + (ctr + np.uint64(1)) * np.uint64(_GAMMA)
    return _mix_array(z)


def counter_value(seed: int, counter: int) -> int:
    return _mix_scalar(_mix_scalar(seed) + ((counter + 1) * _GAMMA & _MASK))


def uniform01(seed: int, counters: np.ndarray) -> np.ndarray:
    """Uniform floats in [0, 1) with 53-bit resolution, one per counter."""
    return (counter_values(seed, counters) >> np.uint64(11)) * (2.0 ** -53)


def bits(seed: int, counters: np.ndarray) -> np.ndarray:
    """Unbiased 0/1 draws, one per counter."""
    return (counter_values(seed, counters) & np.uint64(1)).astype(np.uint8)


def derive_seed(seed: int, tag: int) -> int:
    """Fold a stream tag into a seed; distinct tags give independent streams."""
    return _mix_scalar(_mix_scalar(seed) ^ _mix_scalar(tag ^ _GAMMA))


def permutation(seed: int, count: int) -> np.ndarray:
    """Deterministic Fisher–Yates permutation of range(count)."""
    out = np.arange(count, dtype=np.int64)
    if count < 2:
        return out
    draws = counter_values(seed, np.arange(count - 1, dtype=np.uint64))
    for i in range(count - 1):
        j = i + int(draws[i] % np.uint64(count - i))
        out[i], out[j] = out[j], out[i]
    return out
