"""Seed derivation and innovation draws.

Every random stream is a ``numpy.random.Philox`` generator keyed by a 64-bit
seed.  Child seeds are derived with SplitMix64 so that trial ``i`` of a run
with master seed ``s`` always sees ``derive_seed(s, i)``, independent of how
trials are scheduled.  Gaussian variates come from Box-Muller on the
stream's uniform doubles; Rademacher variates from its integer draws.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *path: int) -> int:
    """Fold a sequence of indices into ``seed``: ``h = splitmix64(h ^ splitmix64(i))``."""
    h = splitmix64(int(seed) & MASK64)
    for i in path:
        h = splitmix64(h ^ splitmix64(int(i) & MASK64))
    return h


def stream(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))


def box_muller(rng: np.random.Generator, size: int) -> np.ndarray:
    half = (size + 1) // 2
    u1 = 1.0 - rng.random(half)  # (0, 1]
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * half)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:size]


def rademacher(rng: np.random.Generator, size: int) -> np.ndarray:
    bits = rng.integers(0, 2, size=size, dtype=np.int64)
    return 2.0 * bits - 1.0


INNOVATIONS = {"gaussian": box_muller, "rademacher": rademacher}


def innovations(kind: str, rng: np.random.Generator, size: int) -> np.ndarray:
    try:
        draw = INNOVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown innovation {kind!r}; choose from {sorted(INNOVATIONS)}") from None
    return draw(rng, size)
