import numpy as np


def make_rng(seed, *keys):
    """Counter-based generator for stream ``keys`` under a 64-bit master seed.

    Distinct key tuples give independent streams, so splitting, fold
    assignment and power-method starts never share draws.
    """
    seq = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF,
                                 spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(seq))
