"""Seeded random streams.

All randomness goes through :func:`make_rng`, a counter-based Philox
generator keyed by an integer seed. Replicate ``i`` of a study uses
``seed_base + i`` so results do not depend on scheduling or worker count.
"""
import numpy as np


def make_rng(seed: int | None) -> np.random.Generator:
    if seed is None:
        return np.random.Generator(np.random.Philox())
    return np.random.Generator(np.random.Philox(key=int(seed)))
