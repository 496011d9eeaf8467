"""
Seed-stream splitting for reproducible simulations

Every random draw in the lab comes from a Philox generator keyed by the
master seed plus a tuple of stream ids, so parallel workers and refined SNR
grids never share or shift each other's streams.
"""

import numpy as np

# Top-level stream ids
INIT = 0
TRAIN = 1
VALIDATION = 2
EVALUATION = 3
POLAR = 4


def make_rng(seed, *keys):
    """
    Build an independent generator for (seed, keys)

    Args:
        seed: Master seed (non-negative integer)
        keys: Stream ids, e.g. (EVALUATION, point_index)

    Returns:
        numpy.random.Generator: Philox-backed generator
    """
    if seed < 0:
        raise ValueError(f"Seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(sequence))


def random_bits(rng, batch_size, k):
    """Uniform {0,1} bit matrix of shape (batch_size, k) as float64"""
    return rng.integers(0, 2, size=(batch_size, k)).astype(np.float64)
