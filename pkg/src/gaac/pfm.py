"""Parameter-fitness regressor: predicts the TD error of a (state, params) pair.

A small ELU network trained by MSE on the collected samples. Inputs are
standardized with statistics taken from the training set and stored with the
model, so prediction is self-contained; targets are left on their raw scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import mlp
from .dataset import Sample

# Small search grid for cross-validated training.
DEFAULT_GRID = (
    {"lr": 1e-3, "epochs": 200},
    {"lr": 1e-3, "epochs": 500},
    {"lr": 3e-4, "epochs": 200},
    {"lr": 3e-4, "epochs": 500},
)


@dataclass
class PfmConfig:
    hidden: tuple[int, ...] = (40, 40)
    lr: float = 1e-3
    epochs: int = 200
    batch_size: int = 64


@dataclass
class PfmModel:
    net: mlp.Mlp
    input_mean: np.ndarray
    input_std: np.ndarray
    loss_history: list[float] = field(default_factory=list)
    fold_scores: dict = field(default_factory=dict)
    degenerate: bool = False

    @property
    def final_mse(self) -> float:
        return self.loss_history[-1] if self.loss_history else float("nan")


def _design_matrix(samples: list[Sample]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([np.concatenate([s.state, s.params]) for s in samples])
    y = np.array([[s.td_err] for s in samples])
    return x, y


def _standardize_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std < 1e-12] = 1.0
    return mean, std


def _fit(x, y, hidden, lr, epochs, batch_size, seed) -> PfmModel:
    mean, std = _standardize_stats(x)
    xs = (x - mean) / std
    seeds = np.random.SeedSequence(seed).generate_state(2)
    net = mlp.init_xavier(mlp.layer_chain([x.shape[1], *hidden, 1], "elu"), int(seeds[0]))
    net, history = mlp.mse_fit(net, xs, y, lr=lr, epochs=epochs, seed=int(seeds[1]), batch_size=batch_size)
    degenerate = bool(np.all(np.ptp(x, axis=0) < 1e-12) and np.ptp(y) > 1e-12)
    return PfmModel(net, mean, std, history, degenerate=degenerate)


def train_pfm(samples: list[Sample], cfg: PfmConfig, seed: int) -> PfmModel:
    """Train the fitness regressor on all samples with a fixed configuration."""
    if len(samples) < 10:
        raise ValueError(f"need at least 10 samples, got {len(samples)}")
    x, y = _design_matrix(samples)
    return _fit(x, y, cfg.hidden, cfg.lr, cfg.epochs, cfg.batch_size, seed)


def predict(model: PfmModel, state: np.ndarray, params: np.ndarray) -> float:
    """Predicted TD error for one (state, params) pair."""
    x = np.concatenate([np.asarray(state, dtype=np.float64), np.asarray(params, dtype=np.float64)])
    return float(mlp.forward(model.net, (x - model.input_mean) / model.input_std)[0])


def predict_batch(model: PfmModel, state: np.ndarray, params_matrix: np.ndarray) -> np.ndarray:
    """Predicted TD errors for many parameter vectors at one fixed state."""
    params_matrix = np.asarray(params_matrix, dtype=np.float64)
    x = np.hstack([np.tile(np.asarray(state, dtype=np.float64), (params_matrix.shape[0], 1)), params_matrix])
    return mlp.forward_batch(model.net, (x - model.input_mean) / model.input_std)[:, 0]


@dataclass
class CvResult:
    scores: dict[str, np.ndarray]  # config key -> (repeats, folds) validation MSE
    best_config: dict
    model: PfmModel


def _fold_indices(n: int, folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    order = rng.permutation(n)
    return [np.sort(part) for part in np.array_split(order, folds)]


def cross_validate(
    samples: list[Sample],
    folds: int,
    repeats: int,
    seed: int,
    cfg: PfmConfig | None = None,
    grid=DEFAULT_GRID,
) -> CvResult:
    """Repeated k-fold validation over a small config grid, then retrain on everything.

    Splits are seeded and disjoint per repeat. The returned model is trained on
    the full dataset with the best-scoring (lowest mean validation MSE) config.
    """
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > len(samples):
        raise ValueError(f"{folds} folds exceed dataset size {len(samples)}")
    cfg = cfg or PfmConfig()
    x, y = _design_matrix(samples)
    n = x.shape[0]
    root = np.random.SeedSequence(seed)
    split_seeds = root.generate_state(repeats + 1)

    scores: dict[str, np.ndarray] = {}
    for gi, entry in enumerate(grid):
        table = np.empty((repeats, folds))
        for r in range(repeats):
            fold_rng = np.random.default_rng(int(split_seeds[r]))
            parts = _fold_indices(n, folds, fold_rng)
            for f, val_idx in enumerate(parts):
                train_mask = np.ones(n, dtype=bool)
                train_mask[val_idx] = False
                model = _fit(
                    x[train_mask], y[train_mask], cfg.hidden,
                    entry["lr"], entry["epochs"], cfg.batch_size,
                    seed=int(split_seeds[-1]) + 1000 * gi + 10 * r + f,
                )
                pred = mlp.forward_batch(model.net, (x[val_idx] - model.input_mean) / model.input_std)
                table[r, f] = float(np.mean((pred - y[val_idx]) ** 2))
        scores[f"lr={entry['lr']},epochs={entry['epochs']}"] = table

    means = {k: float(v.mean()) for k, v in scores.items()}
    best_key = min(means, key=means.get)
    best = dict(grid[[f"lr={e['lr']},epochs={e['epochs']}" for e in grid].index(best_key)])
    final = _fit(x, y, cfg.hidden, best["lr"], best["epochs"], cfg.batch_size, seed=int(split_seeds[-1]))
    final.fold_scores = {k: v.tolist() for k, v in scores.items()}
    return CvResult(scores, best, final)


def save_pfm(model: PfmModel, path) -> None:
    """Net serialization plus a standardization block, one file."""
    mlp.save_mlp(model.net, path)
    with open(path, "a") as fh:
        fh.write("mean " + " ".join(repr(float(v)) for v in model.input_mean) + "\n")
        fh.write("std " + " ".join(repr(float(v)) for v in model.input_std) + "\n")


def load_pfm(path) -> PfmModel:
    net = mlp.load_mlp(path)
    mean = std = None
    with open(path) as fh:
        for ln in fh:
            if ln.startswith("mean "):
                mean = np.array([float(v) for v in ln.split()[1:]])
            elif ln.startswith("std "):
                std = np.array([float(v) for v in ln.split()[1:]])
    if mean is None or std is None:
        raise ValueError(f"missing standardization block in {path}")
    return PfmModel(net, mean, std)
