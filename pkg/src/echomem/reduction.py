"""Order-independent summation over atoms.

Partial sums are taken over fixed-size chunks of the atom index and combined
with :func:`math.fsum`, so the result does not depend on how many workers
computed the partials.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 8192


def _partials(values: np.ndarray, threads: int) -> list:
    starts = range(0, len(values), CHUNK)
    if threads <= 1 or len(values) <= CHUNK:
        return [values[i:i + CHUNK].sum() for i in starts]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: values[i:i + CHUNK].sum(), starts))


def deterministic_sum(values, threads: int = 1):
    """Sum a 1-D real or complex array; bit-identical for any ``threads``."""
    values = np.asarray(values)
    if values.ndim != 1:
        raise ValueError("expected a 1-D array")
    parts = _partials(values, threads)
    if np.iscomplexobj(values):
        return complex(math.fsum(p.real for p in parts), math.fsum(p.imag for p in parts))
    return math.fsum(float(p) for p in parts)
