"""Seeding contract.

Every stochastic routine takes an explicit ``numpy.random.Generator``. The
bit generator is PCG64 seeded with a 64-bit integer; independent child
seeds come from ``numpy.random.SeedSequence.spawn`` so that concurrent
trials never share a stream and every trial can be replayed from the seed
printed next to it.
"""

from __future__ import annotations

import numpy as np

SEED_BITS = 64


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(check_seed(seed)))


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**SEED_BITS:
        raise ValueError(f"seed must be a {SEED_BITS}-bit unsigned integer, got {seed}")
    return seed


def spawn_seeds(seed: int, n: int) -> list[int]:
    """``n`` independent 64-bit child seeds derived from ``seed``."""
    children = np.random.SeedSequence(check_seed(seed)).spawn(n)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


def draw_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63))
