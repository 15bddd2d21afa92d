"""Seeded random substreams.

Every random quantity is drawn from its own PCG64 stream derived from one
root seed, so changing how many draws one purpose consumes never shifts the
draws of another.
"""

from __future__ import annotations

import numpy as np

POSITIONS = 1
DETUNINGS = 2
ROTATION_ANGLES = 3
ROTATION_AXES = 4
PUMPING = 5
DIRECTIONS = 6
INSTANCES = 7


def substream(seed: int, purpose: int, *index: int) -> np.random.Generator:
    """Generator for ``(seed, purpose, *index)``; identical keys give identical draws."""
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(purpose, *index))
    return np.random.Generator(np.random.PCG64(ss))
