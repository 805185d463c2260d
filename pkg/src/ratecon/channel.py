"""Binary symmetric channel simulation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import prng


@dataclass(frozen=True)
class BscParams:
    """Crossover probability and seed of a simulated BSC.

    The flip decision at position i depends only on (seed, i), so a
    transmission is reproducible and independent of how many frames were
    sent before it.
    """

    crossover: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.crossover < 0.5:
            raise ValueError(f"crossover must be in [0, 0.5), got {self.crossover}")


def bsc_transmit(bits: np.ndarray, params: BscParams) -> np.ndarray:
    """Flip each bit independently with probability params.crossover."""
    word = np.asarray(bits, dtype=np.uint8)
    if params.crossover == 0.0:
        return word.copy()
    u = prng.uniform01(params.seed, np.arange(word.size, dtype=np.uint64))
    flips = (u < params.crossover).astype(np.uint8)
    return word ^ flips
