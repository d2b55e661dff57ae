"""Deterministic random streams.

Every stochastic step in the package (parameter init, epoch shuffling,
synthetic data, gradient-check sampling) draws from a PCG64 generator keyed
by ``(seed, stream id)`` through numpy's SeedSequence spawning.  Keying by
stream id keeps the streams independent: consuming more values in one stream
never shifts another, so e.g. changing the number of epochs does not disturb
parameter initialisation.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the PCG64 generator for ``seed`` and a stream key.

    The same ``(seed, key)`` always yields the same value sequence.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))
