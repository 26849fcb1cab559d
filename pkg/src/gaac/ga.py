"""Genetic optimizer for policy-parameter vectors under a fitness function.

For one sample the optimizer searches the neighborhood spanned by the
dataset-wide per-dimension parameter bounds: half the initial population is
drawn from a lattice over those bounds, half from a Gaussian around the
sample's own parameters. Generations evolve by softmax parent selection,
element-wise crossover and bounded mutation; the best vector ever seen
(including the starting one) is returned, so the result never regresses.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .pfm import PfmModel, predict_batch
from .seeding import child_rng


@dataclass
class GaConfig:
    population_size: int = 50
    parent_pairs: int = 25
    max_generations: int = 20
    base_mutation_rate: float = 0.01
    stop_threshold: float = 0.1
    resolution: float = 0.05
    gaussian_spread: float = 0.1
    mutation_unit_interval: bool = False  # replace mutated genes with draws from [0,1] instead of the bounds

    def __post_init__(self):
        if self.population_size < 2 or self.population_size % 2 != 0:
            raise ValueError(f"population size must be even and >= 2, got {self.population_size}")
        if not 1 <= self.parent_pairs <= self.population_size // 2:
            raise ValueError(f"parent pairs must be in [1, population/2], got {self.parent_pairs}")
        if not 0.0 <= self.base_mutation_rate <= 1.0:
            raise ValueError(f"base mutation rate must be in [0, 1], got {self.base_mutation_rate}")
        if self.stop_threshold <= 0:
            raise ValueError("stop threshold must be positive")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")


@dataclass
class Population:
    members: np.ndarray  # (population_size, dim)
    fitness: np.ndarray  # (population_size,)
    generation: int = 0


def lattice_values(low: float, high: float, resolution: float) -> np.ndarray:
    """Discrete candidate values {low, low+res, ...} always including high."""
    if high < low:
        raise ValueError(f"invalid bounds: {low} > {high}")
    steps = int(np.floor((high - low) / resolution + 1e-12))
    values = low + resolution * np.arange(steps + 1)
    if values[-1] < high - 1e-12:
        values = np.append(values, high)
    return values


def init_population(
    seed_params: np.ndarray,
    bounds: tuple[np.ndarray, np.ndarray],
    cfg: GaConfig,
    rng: np.random.Generator,
    fitness_fn,
) -> Population:
    """Half lattice draws over the bounds, half Gaussian draws around seed_params."""
    low, high = np.asarray(bounds[0], dtype=np.float64), np.asarray(bounds[1], dtype=np.float64)
    if np.any(low > high):
        raise ValueError("lower bound exceeds upper bound")
    dim = len(low)
    half = cfg.population_size // 2

    lattice_half = np.empty((half, dim))
    for h in range(dim):
        values = lattice_values(low[h], high[h], cfg.resolution)
        lattice_half[:, h] = rng.choice(values, size=half)

    gaussian_half = seed_params + cfg.gaussian_spread * rng.standard_normal((half, dim))
    gaussian_half = np.clip(gaussian_half, low, high)

    members = np.vstack([lattice_half, gaussian_half])
    return Population(members, np.asarray(fitness_fn(members), dtype=np.float64), generation=0)


def selection_probs(fitness: np.ndarray) -> np.ndarray:
    """Softmax of fitness, computed with a max shift for overflow safety."""
    f = np.asarray(fitness, dtype=np.float64)
    e = np.exp(f - f.max())
    return e / e.sum()


def _fixpoint_free_reorder(count: int, rng: np.random.Generator) -> np.ndarray:
    for _ in range(10000):
        perm = rng.permutation(count)
        if not np.any(perm == np.arange(count)):
            return perm
    return np.roll(np.arange(count), 1)  # unreachable in practice; a shift is always fixpoint-free


def pick_parents(
    pop: Population, probs: np.ndarray, pairs: int, rng: np.random.Generator
) -> list[tuple[int, int]]:
    """Top-`pairs` members by selection probability, paired against a random
    fixpoint-free reorder of themselves. Returns index pairs into the population."""
    if pairs < 2:
        raise ValueError("need at least 2 parent pairs for a fixpoint-free pairing")
    if pairs > len(probs) // 2:
        raise ValueError(f"{pairs} pairs exceed half the population")
    top = np.argsort(-probs, kind="stable")[:pairs]  # ties resolve to the lower index
    reorder = _fixpoint_free_reorder(pairs, rng)
    return [(int(top[q]), int(top[reorder[q]])) for q in range(pairs)]


def crossover(
    parent_a: np.ndarray, parent_b: np.ndarray, p_a: float, p_b: float, rng: np.random.Generator
) -> np.ndarray:
    """Element-wise inheritance: gene h comes from parent_a with relative probability p_a/(p_a+p_b)."""
    if p_a + p_b <= 0:
        raise ValueError("parent probabilities must have positive sum")
    take_a = rng.uniform(size=len(parent_a)) <= p_a / (p_a + p_b)
    return np.where(take_a, parent_a, parent_b)


def mutate(
    child: np.ndarray,
    p_a: float,
    p_b: float,
    base_rate: float,
    bounds: tuple[np.ndarray, np.ndarray],
    rng: np.random.Generator,
    unit_interval: bool = False,
) -> np.ndarray:
    """Replace each gene with probability base_rate * (1 - p_a - p_b), clamped at 0.

    Replacement values are uniform over the per-dimension bounds (or over [0, 1]
    with unit_interval, the literal textbook rule).
    """
    rate = max(0.0, base_rate * (1.0 - p_a - p_b))
    flip = rng.uniform(size=len(child)) <= rate
    if unit_interval:
        draws = rng.uniform(0.0, 1.0, size=len(child))
    else:
        draws = rng.uniform(bounds[0], bounds[1])
    return np.where(flip, draws, child)


@dataclass
class GaResult:
    best_params: np.ndarray
    best_fitness: float
    seed_fitness: float
    generations: int
    log: list[tuple[int, float, float]] = field(default_factory=list)  # (generation, best, total)


def evolve(
    fitness_fn,
    seed_params: np.ndarray,
    bounds: tuple[np.ndarray, np.ndarray],
    cfg: GaConfig,
    rng: np.random.Generator,
) -> GaResult:
    """Run the full evolution loop for one starting vector.

    fitness_fn maps an (n, dim) array of candidates to n fitness values.
    Evolution stops when the population's total fitness changes by at most
    stop_threshold between consecutive generations, or at max_generations.
    The best candidate ever evaluated, seed included, is returned.
    """
    seed_params = np.asarray(seed_params, dtype=np.float64)
    seed_fitness = float(fitness_fn(seed_params[None, :])[0])
    pop = init_population(seed_params, bounds, cfg, rng, fitness_fn)

    best_params, best_fitness = seed_params, seed_fitness
    top = int(np.argmax(pop.fitness))
    if pop.fitness[top] > best_fitness:
        best_params, best_fitness = pop.members[top].copy(), float(pop.fitness[top])

    log = [(0, float(pop.fitness.max()), float(pop.fitness.sum()))]
    for _ in range(cfg.max_generations):
        probs = selection_probs(pop.fitness)
        pairs = pick_parents(pop, probs, cfg.parent_pairs, rng)

        children = np.empty((cfg.parent_pairs, pop.members.shape[1]))
        for q, (i, j) in enumerate(pairs):
            child = crossover(pop.members[i], pop.members[j], probs[i], probs[j], rng)
            children[q] = mutate(
                child, probs[i], probs[j], cfg.base_mutation_rate, bounds, rng, cfg.mutation_unit_interval
            )
        child_fitness = np.asarray(fitness_fn(children), dtype=np.float64)

        parent_idx = {i for i, _ in pairs}
        leftover = np.array([k for k in range(cfg.population_size) if k not in parent_idx], dtype=int)
        members = np.vstack([children, pop.members[leftover]])
        fitness = np.concatenate([child_fitness, pop.fitness[leftover]])

        prev_total = float(pop.fitness.sum())
        pop = Population(members, fitness, pop.generation + 1)

        top = int(np.argmax(pop.fitness))
        if pop.fitness[top] > best_fitness:
            best_params, best_fitness = pop.members[top].copy(), float(pop.fitness[top])
        total = float(pop.fitness.sum())
        log.append((pop.generation, float(pop.fitness.max()), total))
        if abs(total - prev_total) <= cfg.stop_threshold:
            break

    return GaResult(best_params, best_fitness, seed_fitness, pop.generation, log)


# ---------------------------------------------------------------------------
# Batch optimization of many samples against a fitness model.

_WORKER: dict = {}


def _init_worker(model: PfmModel, bounds, cfg: GaConfig, master_seed: int) -> None:
    _WORKER.update(model=model, bounds=bounds, cfg=cfg, master_seed=master_seed)


def _optimize_one(task: tuple[int, np.ndarray, np.ndarray]) -> tuple[int, GaResult]:
    idx, state, params = task
    model, bounds, cfg = _WORKER["model"], _WORKER["bounds"], _WORKER["cfg"]
    fitness_fn = lambda candidates: predict_batch(model, state, candidates)
    rng = child_rng(_WORKER["master_seed"], idx)
    return idx, evolve(fitness_fn, params, bounds, cfg, rng)


def resolve_workers(requested: int | None = None) -> int:
    """Worker count: explicit argument, else GAAC_THREADS, else the CPU count."""
    if requested is not None:
        return max(1, int(requested))
    env_cap = os.environ.get("GAAC_THREADS")
    if env_cap:
        return max(1, int(env_cap))
    return max(1, os.cpu_count() or 1)


def optimize_tuples(
    model: PfmModel,
    tasks: list[tuple[int, np.ndarray, np.ndarray]],
    bounds: tuple[np.ndarray, np.ndarray],
    cfg: GaConfig,
    master_seed: int,
    workers: int | None = None,
) -> dict[int, GaResult]:
    """Optimize many (index, state, params) tuples; a pure map over the tasks.

    Each tuple gets its own random stream derived from (master_seed, index),
    so results are identical for any worker count or execution order.
    """
    workers = resolve_workers(workers)
    results: dict[int, GaResult] = {}
    if workers > 1 and len(tasks) > 1:
        try:
            with ProcessPoolExecutor(
                max_workers=workers, initializer=_init_worker, initargs=(model, bounds, cfg, master_seed)
            ) as ex:
                chunk = max(1, len(tasks) // (workers * 8))
                for idx, result in ex.map(_optimize_one, tasks, chunksize=chunk):
                    results[idx] = result
            return results
        except OSError:
            pass  # restricted environments: fall through to the serial path
    _init_worker(model, bounds, cfg, master_seed)
    for task in tasks:
        idx, result = _optimize_one(task)
        results[idx] = result
    return results
