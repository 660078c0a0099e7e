"""Deterministic seed derivation shared by every random stream in the package.

``derive_seed(seed, *keys)`` feeds the base seed and the integer keys to
``numpy.random.SeedSequence`` (keys go in ``spawn_key``) and returns 64 bits
of generated state. Streams keyed differently are statistically independent
and never depend on scheduling or call order.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, *keys: int) -> int:
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(int(k) for k in keys))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)
