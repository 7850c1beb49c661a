"""Seeded random number generation shared by every stochastic component.

All randomness flows through numpy's PCG64 generator so that a stored seed
plus the algorithm identifier fully reproduces a run.
"""

from __future__ import annotations

import numpy as np

RNG_ALGORITHM = "numpy-pcg64"


def new_rng(seed: int) -> np.random.Generator:
    """Fresh deterministic generator for the given seed."""
    return np.random.Generator(np.random.PCG64(seed))


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    """Glorot/Xavier uniform draw with the given fan sizes."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
