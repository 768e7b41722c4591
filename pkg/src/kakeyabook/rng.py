"""Seed derivation: every parallel task gets a generator spawned from one master seed."""

from __future__ import annotations

import numpy as np


def child_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(count)


def child_seed_ints(seed: int, count: int) -> list[int]:
    """Plain integer seeds for sub-tasks (stable across runs and platforms)."""
    return [int(s.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1)) for s in child_seeds(seed, count)]


def chunk_generators(seed: int, samples: int, chunk: int) -> list[tuple[np.random.Generator, int]]:
    """Split ``samples`` into fixed-size chunks, one generator per chunk.

    Chunk boundaries depend only on ``samples`` and ``chunk``, never on how
    many workers consume them.
    """
    n = -(-samples // chunk) if samples > 0 else 0
    seqs = child_seeds(seed, n)
    sizes = [chunk] * (n - 1) + ([samples - chunk * (n - 1)] if n else [])
    return [(np.random.default_rng(s), k) for s, k in zip(seqs, sizes)]
