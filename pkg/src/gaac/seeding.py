"""Deterministic seed derivation: every random stream hangs off one master seed.

Streams are addressed by an integer path (stage, round, tuple index, ...), so
units of work can run in any order, or in parallel, and still reproduce.
"""

from __future__ import annotations

import numpy as np


def child_seq(master_seed: int, *path: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(p) for p in path))


def child_rng(master_seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(child_seq(master_seed, *path))


def child_seed(master_seed: int, *path: int) -> int:
    """A derived integer seed, for APIs that take a plain seed."""
    return int(child_seq(master_seed, *path).generate_state(1, dtype=np.uint64)[0])
