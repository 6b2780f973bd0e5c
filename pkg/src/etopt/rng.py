"""Reproducible random streams.

Every source of randomness in a run is a Philox counter stream addressed by
``(master_seed, purpose, round, agent)``. The master seed and the purpose id
form the 128-bit Philox key; the round and agent index are placed in the two
high words of the 256-bit counter. Streams with different addresses therefore
never overlap (each has 2**128 blocks of headroom), and any individual stream
can be regenerated in isolation.

Draw order within a stream is part of the contract: callers document the
sequence of draws they make so a stream's content is reproducible from its
address alone.
"""

import numpy as np

# Purpose ids (key word 2). New purposes append; never renumber.
GRAPH = 1  # per-round topology sampling
DATA = 2  # per-(round, agent) problem data
INIT = 3  # per-agent decision initialization
BENCH = 4  # benchmark solver restarts


def stream(master_seed, purpose, round_index=0, agent=0):
    """Return a fresh ``numpy.random.Generator`` for the given address."""
    if master_seed < 0:
        raise ValueError("master seed must be nonnegative")
    key = np.array([np.uint64(master_seed), np.uint64(purpose)], dtype=np.uint64)
    counter = np.array(
        [0, 0, np.uint64(agent), np.uint64(round_index)], dtype=np.uint64
    )
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
