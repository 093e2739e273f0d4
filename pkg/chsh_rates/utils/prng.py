"""Counter-based random streams.

Every stream is a Philox generator keyed by the run seed; the stream indices
(grid point, restart, trial, round chunk ...) are written into the high words
of the 256-bit counter, so two streams never overlap and any stream can be
regenerated without replaying the others.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed: int, *indices: int) -> np.random.Generator:
    if len(indices) > 3:
        raise ValueError("at most three stream indices are supported")
    counter = np.zeros(4, dtype=np.uint64)
    for slot, index in enumerate(indices, start=1):
        counter[slot] = np.uint64(index & _MASK64)
    key = np.array([seed & _MASK64, (seed >> 64) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))
