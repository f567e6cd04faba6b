"""Seed-splitting scheme.

Every random stream in a run is derived from the experiment seed and a
named purpose via ``numpy.random.SeedSequence(seed, spawn_key=key)``.
Adding a new purpose never perturbs draws on existing streams, and two
runs with the same (seed, purpose, ids) consume identical streams.
"""

import numpy as np

# Purpose ids; appending new ones is backward compatible.
GRADIENT = 0
DELIVERY = 1
ATTACK = 2
OUTPUT = 3
AUDIT = 4
PROFILE = 5


def stream(seed, purpose, *ids):
    """Return a Generator for (seed, purpose, *ids).

    ids are small non-negative integers (node index, trial index, ...).
    """
    key = (int(purpose),) + tuple(int(i) for i in ids)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))
