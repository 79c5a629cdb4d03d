"""Deterministic RNG stream derivation.

Every random draw in the package flows through a ``numpy.random.Generator``
derived from ``(base_seed, tag, *indices)`` via ``SeedSequence``, so any cell
of a larger experiment (one instance, one variant, one lambda) can be
reproduced in isolation without replaying the whole run.
"""
from __future__ import annotations

import numpy as np

# Purpose tags partition the stream space per base seed.
TAG_TOPOLOGY = 1
TAG_SYSTEM = 2
TAG_INIT = 3
TAG_TRAIN = 4
TAG_VALIDATION = 5
TAG_EVAL = 6
TAG_SWEEP = 7


def float_key(x: float) -> int:
    """Stable integer key for a float (its IEEE-754 bit pattern)."""
    return int(np.float64(x).view(np.uint64))


def seed_seq(base_seed: int, *keys: int) -> np.random.SeedSequence:
    if base_seed < 0:
        raise ValueError("base_seed must be non-negative")
    return np.random.SeedSequence([int(base_seed), *(int(k) for k in keys)])


def stream(base_seed: int, *keys: int) -> np.random.Generator:
    """Generator for the sub-stream identified by (base_seed, *keys)."""
    return np.random.default_rng(seed_seq(base_seed, *keys))
