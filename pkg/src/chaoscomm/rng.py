"""Seeded random streams.

Every random draw comes from a Philox (counter-based) generator whose key is
derived from ``SeedSequence(entropy=seed, spawn_key=key)``.  Keys are tuples
of small integers, e.g. ``(SYMBOLS, trial)``, so a given trial always sees the
same numbers regardless of how trials are scheduled across workers.
"""
from __future__ import annotations

import numpy as np

SYMBOLS = 1
NOISE = 2
PERTURB = 3
GAMMA = 4
NOISE_TRAINING = 5


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(0 if seed is None else seed)
