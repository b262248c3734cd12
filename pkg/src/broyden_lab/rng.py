"""Seeded random streams.

Every random draw in the library comes from numpy's PCG64 bit generator,
seeded through a ``SeedSequence``. Independent sub-streams are derived by
giving the sequence a spawn key, so a run's stream depends only on
``(seed, key)`` and never on wall-clock state.
"""

import numpy as np

RNG_IDENTITY = f"numpy-{np.__version__}/PCG64+SeedSequence"

# spawn keys for the independent purposes a single seed feeds
STREAM_PROBLEM = 0
STREAM_X0 = 1
STREAM_DIRECTIONS = 2
STREAM_SAMPLING = 3


def make_rng(seed, *key):
    """Generator for stream ``key`` under master ``seed``."""
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
