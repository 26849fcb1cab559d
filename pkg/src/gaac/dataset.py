"""Datasets of (state, policy-parameter, TD-error) samples and their persistence.

Covers best-episode selection across rounds, the random subset handed to the
genetic optimizer, the merge of optimized parameters back into the full
training set, and exact-round-trip CSV storage.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


@dataclass
class Sample:
    """One observation tuple: state, policy parameters acted from, resulting TD error.

    Indices are 1-based.
    """

    state: np.ndarray
    params: np.ndarray
    td_err: float
    round_idx: int
    episode_idx: int
    step_idx: int


@dataclass
class EpisodeRecord:
    """Ordered samples of one episode plus its outcome."""

    samples: list[Sample]
    cumulative_reward: float
    reached_goal: bool
    round_idx: int
    episode_idx: int

    def __len__(self) -> int:
        return len(self.samples)


@dataclass
class OptimizedPair:
    """A (state, parameters) training pair after dataset optimization."""

    state: np.ndarray
    params: np.ndarray
    was_updated: bool


def best_episode_per_round(rounds: list[list[EpisodeRecord]]) -> tuple[list[EpisodeRecord], list[Sample]]:
    """Keep the highest-cumulative-reward episode of each round; ties go to the lowest index.

    Returns the selected episodes and their concatenated samples.
    """
    if not rounds:
        raise ValueError("no rounds")
    selected = []
    for i, episodes in enumerate(rounds):
        if not episodes:
            raise ValueError(f"round {i + 1} has no episodes")
        best = max(episodes, key=lambda ep: (ep.cumulative_reward, -ep.episode_idx))
        selected.append(best)
    samples = [s for ep in selected for s in ep.samples]
    return selected, samples


def extract_pairs(samples: list[Sample]) -> list[tuple[np.ndarray, np.ndarray]]:
    """Project samples onto (state, params) pairs, preserving order."""
    return [(s.state, s.params) for s in samples]


def select_fraction(samples: list[Sample], fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Pick floor(fraction * n) sample indices uniformly without replacement.

    Returns (chosen, complement) index arrays; chosen order is the draw order.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    n = len(samples)
    k = int(np.floor(fraction * n))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(n, size=k, replace=False)
    mask = np.ones(n, dtype=bool)
    mask[chosen] = False
    return chosen.astype(int), np.flatnonzero(mask)


def merge_optimized(
    samples: list[Sample],
    updates: dict[int, np.ndarray],
    allowed: np.ndarray,
) -> list[OptimizedPair]:
    """Apply optimized parameters to their samples; every other pair keeps its original params.

    `updates` is keyed by position in `samples` and every key must be in `allowed`
    (the subset that was actually handed to the optimizer).
    """
    allowed_set = set(int(i) for i in allowed)
    bad = set(updates) - allowed_set
    if bad:
        raise ValueError(f"updates for samples outside the selected subset: {sorted(bad)[:5]}")
    out = []
    for i, s in enumerate(samples):
        if i in updates:
            out.append(OptimizedPair(s.state, np.asarray(updates[i], dtype=np.float64), True))
        else:
            out.append(OptimizedPair(s.state, s.params, False))
    return out


def param_bounds(samples: list[Sample]) -> tuple[np.ndarray, np.ndarray]:
    """Element-wise min and max of the policy parameters over the dataset."""
    if not samples:
        raise ValueError("empty dataset")
    stacked = np.stack([s.params for s in samples])
    return stacked.min(axis=0), stacked.max(axis=0)


def samples_digest(samples: list[Sample]) -> str:
    """Content hash of a dataset, for checking that two stages saw identical data."""
    h = hashlib.sha256()
    for s in samples:
        h.update(np.ascontiguousarray(s.state).tobytes())
        h.update(np.ascontiguousarray(s.params).tobytes())
        h.update(np.float64(s.td_err).tobytes())
        h.update(f"{s.round_idx},{s.episode_idx},{s.step_idx};".encode())
    return h.hexdigest()


def _fmt(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def save_samples(samples: list[Sample], path) -> None:
    """CSV with header; floats written with repr so load is bit-exact."""
    if not samples:
        raise ValueError("refusing to save an empty dataset")
    sd = len(samples[0].state)
    pd = len(samples[0].params)
    header = (
        "round,episode,t,"
        + ",".join(f"s{i}" for i in range(sd))
        + ","
        + ",".join(f"p{i}" for i in range(pd))
        + ",td_err"
    )
    lines = [header]
    for s in samples:
        lines.append(f"{s.round_idx},{s.episode_idx},{s.step_idx},{_fmt(s.state)},{_fmt(s.params)},{s.td_err!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_samples(path) -> list[Sample]:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    cols = lines[0].split(",")
    sd = sum(1 for c in cols if c.startswith("s") and c[1:].isdigit())
    pd = sum(1 for c in cols if c.startswith("p") and c[1:].isdigit())
    samples = []
    for ln in lines[1:]:
        parts = ln.split(",")
        state = np.array([float(v) for v in parts[3:3 + sd]])
        params = np.array([float(v) for v in parts[3 + sd:3 + sd + pd]])
        samples.append(Sample(state, params, float(parts[-1]), int(parts[0]), int(parts[1]), int(parts[2])))
    return samples


def save_pairs(pairs: list[OptimizedPair], path) -> None:
    if not pairs:
        raise ValueError("refusing to save an empty dataset")
    sd = len(pairs[0].state)
    pd = len(pairs[0].params)
    header = (
        ",".join(f"s{i}" for i in range(sd))
        + ","
        + ",".join(f"p{i}" for i in range(pd))
        + ",updated"
    )
    lines = [header]
    for p in pairs:
        lines.append(f"{_fmt(p.state)},{_fmt(p.params)},{int(p.was_updated)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_pairs(path) -> list[OptimizedPair]:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    cols = lines[0].split(",")
    sd = sum(1 for c in cols if c.startswith("s") and c[1:].isdigit())
    pairs = []
    for ln in lines[1:]:
        parts = ln.split(",")
        state = np.array([float(v) for v in parts[:sd]])
        params = np.array([float(v) for v in parts[sd:-1]])
        pairs.append(OptimizedPair(state, params, bool(int(parts[-1]))))
    return pairs
