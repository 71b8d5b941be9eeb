"""Deterministic RNG derivation.

Every stochastic component draws from a generator derived from a root seed
plus a tuple of integer context keys, so results never depend on call order
and stay reproducible across processes.
"""

from __future__ import annotations

import numpy as np


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for (seed, keys); the same tuple always yields the same stream."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(ss)
