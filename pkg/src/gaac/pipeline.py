"""Three-stage training pipeline and its ablations.

Stage 1 collects samples from independent actor-critic rounds and keeps the
best episode of each round. Stage 2 fits the parameter-fitness regressor and
rewrites a random fraction of the retained parameter vectors with the genetic
optimizer. Stage 3 regresses the final Gaussian policy onto the optimized
(state, parameters) pairs. Ablation modes skip stages: `ac` trains the policy
straight from a single run's raw data, `ac_ga` skips best-episode selection,
`ac_beo` skips the optimizer, `gaac` runs everything.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import actor_critic as ac
from . import dataset, env, ga, mlp, pfm
from .config import ExperimentConfig, dump_config
from .dataset import EpisodeRecord, OptimizedPair, Sample
from .seeding import child_rng, child_seed

# Stream tags for seed derivation.
_S_COLLECT, _S_PFM, _S_SUBSET, _S_GA, _S_POLICY, _S_EVAL = 1, 2, 3, 4, 5, 6


@dataclass
class Stage1Data:
    """Everything collected by stage 1, before and after episode selection."""

    rounds: list[list[EpisodeRecord]]
    best_episodes: list[EpisodeRecord]
    best_samples: list[Sample]
    all_samples: list[Sample]
    attempts: int = 1

    @property
    def successes(self) -> int:
        return sum(1 for ep in self.best_episodes if ep.reached_goal)

    @property
    def env_steps(self) -> int:
        return sum(len(ep) for round_eps in self.rounds for ep in round_eps)

    @property
    def all_episodes(self) -> list[EpisodeRecord]:
        return [ep for round_eps in self.rounds for ep in round_eps]


def collect_rounds(cfg: ExperimentConfig, master_seed: int, attempt: int = 0) -> Stage1Data:
    """Run the configured number of independent rounds and select best episodes."""
    rounds = []
    for m in range(1, cfg.rounds + 1):
        round_seed = child_seed(master_seed, _S_COLLECT, attempt, m)
        rounds.append(
            ac.run_ac_round(
                env,
                round_seed,
                cfg.episodes_per_round,
                cfg.ac_config(),
                round_idx=m,
                max_steps=cfg.max_steps,
                first_episode_idx=(m - 1) * cfg.episodes_per_round + 1,
            )
        )
    best_episodes, best_samples = dataset.best_episode_per_round(rounds)
    all_samples = [s for round_eps in rounds for ep in round_eps for s in ep.samples]
    return Stage1Data(rounds, best_episodes, best_samples, all_samples, attempts=attempt + 1)


def collect_single_run(cfg: ExperimentConfig, master_seed: int, attempt: int = 0) -> Stage1Data:
    """One continuously-learning run of all episodes; no episode selection."""
    round_seed = child_seed(master_seed, _S_COLLECT, attempt, 1)
    abort_at = cfg.ac_stuck_window if cfg.ac_resample_stuck else None
    episodes = ac.run_ac_round(
        env,
        round_seed,
        cfg.total_episodes,
        cfg.ac_config(),
        round_idx=1,
        max_steps=cfg.max_steps,
        abort_if_no_goal_by=abort_at,
    )
    samples = [s for ep in episodes for s in ep.samples]
    return Stage1Data([episodes], episodes, samples, samples, attempts=attempt + 1)


def _mixture_ok(data: Stage1Data, cfg: ExperimentConfig) -> bool:
    n = data.successes
    if cfg.success_min is not None and n < cfg.success_min:
        return False
    if cfg.success_max is not None and n > cfg.success_max:
        return False
    return True


def stage1_collect(cfg: ExperimentConfig, master_seed: int | None = None) -> Stage1Data:
    """Collect training data for the configured mode.

    When a target mixture of goal-reaching retained episodes is configured
    (or stuck-run resampling, for single-run modes), collection is repeated
    with fresh derived seeds until an attempt qualifies.
    """
    master_seed = cfg.seed if master_seed is None else master_seed
    single = cfg.mode in ("ac", "ac_ga")
    for attempt in range(cfg.stage1_attempts):
        if single:
            data = collect_single_run(cfg, master_seed, attempt)
            stuck = cfg.ac_resample_stuck and not any(
                ep.reached_goal for ep in data.all_episodes[: cfg.ac_stuck_window]
            )
            if stuck:
                continue
            if len(data.all_episodes) < cfg.total_episodes:  # aborted early
                continue
        else:
            data = collect_rounds(cfg, master_seed, attempt)
        if _mixture_ok(data, cfg):
            return data
    raise RuntimeError(
        f"no qualifying collection run in {cfg.stage1_attempts} attempts "
        f"(success_min={cfg.success_min}, success_max={cfg.success_max})"
    )


def _normalized_td(samples: list[Sample]) -> list[Sample]:
    """Standardize TD errors within each round (optional; off by default)."""
    by_round: dict[int, list[float]] = {}
    for s in samples:
        by_round.setdefault(s.round_idx, []).append(s.td_err)
    stats = {
        r: (statistics.fmean(v), statistics.pstdev(v) or 1.0) for r, v in by_round.items()
    }
    out = []
    for s in samples:
        mean, std = stats[s.round_idx]
        out.append(Sample(s.state, s.params, (s.td_err - mean) / std, s.round_idx, s.episode_idx, s.step_idx))
    return out


@dataclass
class Stage2Result:
    pairs: list[OptimizedPair]
    model: pfm.PfmModel
    chosen_idx: np.ndarray
    ga_results: dict[int, ga.GaResult]

    @property
    def improved_fraction(self) -> float:
        if not self.ga_results:
            return 0.0
        wins = sum(1 for r in self.ga_results.values() if r.best_fitness > r.seed_fitness)
        return wins / len(self.ga_results)


def stage2_optimize(samples: list[Sample], cfg: ExperimentConfig, master_seed: int | None = None) -> Stage2Result:
    """Fit the fitness regressor and rewrite a random fraction of parameter vectors."""
    master_seed = cfg.seed if master_seed is None else master_seed
    train_samples = _normalized_td(samples) if cfg.normalize_td else samples

    if cfg.pfm_cross_validate:
        model = pfm.cross_validate(
            train_samples, cfg.pfm_cv_folds, cfg.pfm_cv_repeats,
            seed=child_seed(master_seed, _S_PFM), cfg=cfg.pfm_config(),
        ).model
    else:
        model = pfm.train_pfm(train_samples, cfg.pfm_config(), seed=child_seed(master_seed, _S_PFM))

    chosen, _ = dataset.select_fraction(samples, cfg.ga_fraction, seed=child_seed(master_seed, _S_SUBSET))
    bounds = dataset.param_bounds(samples)
    tasks = [(int(i), samples[i].state, samples[i].params) for i in chosen]
    results = ga.optimize_tuples(
        model, tasks, bounds, cfg.ga_config(),
        master_seed=child_seed(master_seed, _S_GA), workers=cfg.workers,
    )
    updates = {i: r.best_params for i, r in results.items()}
    pairs = dataset.merge_optimized(samples, updates, chosen)
    return Stage2Result(pairs, model, chosen, results)


def pairs_from_samples(samples: list[Sample]) -> list[OptimizedPair]:
    """Wrap raw samples as unoptimized training pairs (modes that skip stage 2)."""
    return [OptimizedPair(s.state, s.params, False) for s in samples]


@dataclass
class PolicyModel:
    """Final policy: a net regressed from states onto Gaussian policy parameters."""

    net: mlp.Mlp
    input_mean: np.ndarray
    input_std: np.ndarray
    action_dim: int = 1
    loss_history: list[float] = field(default_factory=list)

    def params(self, state: np.ndarray) -> ac.PolicyParams:
        raw = mlp.forward(self.net, (np.asarray(state, dtype=np.float64) - self.input_mean) / self.input_std)
        mu = raw[: self.action_dim]
        sigma = np.maximum(raw[self.action_dim :], ac.SIGMA_FLOOR)
        return ac.PolicyParams(mu, sigma)

    def __call__(self, state: np.ndarray, rng: np.random.Generator) -> float:
        return float(ac.sample_action(self.params(state), rng)[0])

    def save(self, path) -> None:
        mlp.save_mlp(self.net, path)
        with open(path, "a") as fh:
            fh.write("mean " + " ".join(repr(float(v)) for v in self.input_mean) + "\n")
            fh.write("std " + " ".join(repr(float(v)) for v in self.input_std) + "\n")
            fh.write(f"action_dim {self.action_dim}\n")

    @classmethod
    def load(cls, path) -> "PolicyModel":
        net = mlp.load_mlp(path)
        mean = std = None
        action_dim = 1
        with open(path) as fh:
            for ln in fh:
                if ln.startswith("mean "):
                    mean = np.array([float(v) for v in ln.split()[1:]])
                elif ln.startswith("std "):
                    std = np.array([float(v) for v in ln.split()[1:]])
                elif ln.startswith("action_dim "):
                    action_dim = int(ln.split()[1])
        if mean is None or std is None:
            raise ValueError(f"missing standardization block in {path}")
        return cls(net, mean, std, action_dim)


def stage3_train_policy(
    pairs: list[OptimizedPair], cfg: ExperimentConfig, master_seed: int | None = None
) -> PolicyModel:
    """Regress the final policy net onto the optimized (state, parameters) pairs."""
    if not pairs:
        raise ValueError("empty training dataset")
    master_seed = cfg.seed if master_seed is None else master_seed
    x = np.stack([p.state for p in pairs])
    y = np.stack([p.params for p in pairs])
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std < 1e-12] = 1.0

    seeds = np.random.SeedSequence(child_seed(master_seed, _S_POLICY)).generate_state(2)
    net = mlp.init_xavier(
        mlp.layer_chain([x.shape[1], *cfg.policy_hidden, y.shape[1]], "tanh"), int(seeds[0])
    )
    net, history = mlp.mse_fit(
        net, (x - mean) / std, y,
        lr=cfg.policy_lr, epochs=cfg.policy_epochs, seed=int(seeds[1]), batch_size=cfg.policy_batch,
    )
    return PolicyModel(net, mean, std, action_dim=y.shape[1] // 2, loss_history=history)


@dataclass
class EvaluationReport:
    rewards: list[float]
    reached: list[bool]

    @property
    def mean(self) -> float:
        return float(np.mean(self.rewards))

    @property
    def std(self) -> float:
        return float(np.std(self.rewards))

    @property
    def failed(self) -> int:
        return sum(1 for r in self.reached if not r)


def evaluate(
    policy, episodes: int, master_seed: int, max_steps: int = env.MAX_EPISODE_STEPS
) -> tuple[EvaluationReport, env.Trajectory]:
    """Roll out evaluation episodes with sampled actions; returns the report and the best rollout."""
    if episodes < 1:
        raise ValueError("need at least one evaluation episode")
    rng = child_rng(master_seed, _S_EVAL)
    rewards, reached = [], []
    best = None
    for _ in range(episodes):
        traj = env.run_episode(policy, rng, max_steps=max_steps)
        rewards.append(traj.cumulative_reward)
        reached.append(traj.reached_goal)
        if best is None or traj.cumulative_reward > best.cumulative_reward:
            best = traj
    return EvaluationReport(rewards, reached), best


@dataclass
class RunResult:
    cfg: ExperimentConfig
    stage1: Stage1Data
    stage2: Stage2Result | None
    policy: PolicyModel
    report: EvaluationReport
    best_trajectory: env.Trajectory


def run_mode(cfg: ExperimentConfig, out_dir: Path | str | None = None, stage1: Stage1Data | None = None) -> RunResult:
    """Run the configured ablation mode end to end and optionally persist artifacts."""
    data = stage1 if stage1 is not None else stage1_collect(cfg)

    stage2 = None
    if cfg.mode in ("gaac", "ac_ga"):
        stage2 = stage2_optimize(data.best_samples, cfg)
        pairs = stage2.pairs
    else:
        pairs = pairs_from_samples(data.best_samples)

    policy = stage3_train_policy(pairs, cfg)
    report, best_traj = evaluate(policy, cfg.eval_episodes, cfg.seed, max_steps=cfg.max_steps)
    result = RunResult(cfg, data, stage2, policy, report, best_traj)
    if out_dir is not None:
        write_run_artifacts(result, Path(out_dir))
    return result


def write_run_artifacts(result: RunResult, out_dir: Path) -> None:
    """Persist config, datasets, models, reward log, report and best trajectory."""
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = result.cfg
    dump_config(cfg, out_dir / "config.txt")

    dataset.save_samples(result.stage1.all_samples, out_dir / "samples_all.csv")
    if cfg.mode in ("gaac", "ac_beo"):
        dataset.save_samples(result.stage1.best_samples, out_dir / "samples_retained.csv")
    if result.stage2 is not None:
        dataset.save_pairs(result.stage2.pairs, out_dir / "pairs_optimized.csv")
        pfm.save_pfm(result.stage2.model, out_dir / "pfm.txt")
        write_ga_log(result.stage2, out_dir / "ga_log.csv")
    result.policy.save(out_dir / "policy.txt")

    rows = []
    for ep in result.stage1.all_episodes:
        rows.append((ep.episode_idx, ep.cumulative_reward, "train"))
    for i, reward in enumerate(result.report.rewards, start=1):
        rows.append((i, reward, "eval"))
    write_rewards_csv(rows, out_dir / "rewards.csv")

    env.dump_trajectory(result.best_trajectory, out_dir / "trajectory_best_eval.csv")
    write_report(result, out_dir / "report.txt")


def write_rewards_csv(rows: list[tuple[int, float, str]], path) -> None:
    lines = ["episode,reward,phase"]
    for episode, reward, phase in rows:
        lines.append(f"{episode},{float(reward)!r},{phase}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_ga_log(stage2: Stage2Result, path) -> None:
    lines = ["sample_id,generation,best_fitness,sum_fitness"]
    for idx in sorted(stage2.ga_results):
        for generation, best, total in stage2.ga_results[idx].log:
            lines.append(f"{idx},{generation},{best!r},{total!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_report(result: RunResult, path) -> None:
    cfg, report = result.cfg, result.report
    entries = [
        ("mode", cfg.mode),
        ("master_seed", cfg.seed),
        ("stage1_attempts_used", result.stage1.attempts),
        ("rounds", len(result.stage1.rounds)),
        ("episodes", len(result.stage1.all_episodes)),
        ("env_steps", result.stage1.env_steps),
        ("retained_episodes", len(result.stage1.best_episodes)),
        ("retained_goal_episodes", result.stage1.successes),
        ("retained_samples", len(result.stage1.best_samples)),
        ("optimized_samples", len(result.stage2.chosen_idx) if result.stage2 else 0),
        ("improved_fraction", f"{result.stage2.improved_fraction:.4f}" if result.stage2 else ""),
        ("eval_episodes", len(report.rewards)),
        ("eval_mean", f"{report.mean:.4f}"),
        ("eval_std", f"{report.std:.4f}"),
        ("eval_failed", report.failed),
        ("eval_min", f"{min(report.rewards):.4f}"),
        ("eval_max", f"{max(report.rewards):.4f}"),
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(f"{k} = {v}" for k, v in entries) + "\n")


MODE_DIRS = {"ac": "ac", "ac_ga": "ac_ga", "ac_beo": "ac_beo", "gaac": "gaac"}


def run_ablation(cfg: ExperimentConfig, out_dir: Path | str | None = None) -> dict[str, RunResult]:
    """Run all four modes with shared collection where the modes share a data path.

    The best-episode modes (gaac, ac_beo) share one multi-round collection; the
    single-run modes (ac, ac_ga) share one continuous run.
    """
    from dataclasses import replace

    out_dir = Path(out_dir) if out_dir is not None else None
    results: dict[str, RunResult] = {}

    beo_cfg = replace(cfg, mode="gaac")
    beo_data = stage1_collect(beo_cfg)
    single_cfg = replace(cfg, mode="ac", success_min=None, success_max=None)
    single_data = stage1_collect(single_cfg)

    for mode in MODE_DIRS:
        mode_cfg = replace(cfg, mode=mode)
        data = beo_data if mode in ("gaac", "ac_beo") else single_data
        sub_dir = out_dir / MODE_DIRS[mode] if out_dir is not None else None
        results[mode] = run_mode(mode_cfg, out_dir=sub_dir, stage1=data)
    return results


@dataclass
class SweepResult:
    fractions: list[float]
    repeats: int
    reports: dict[float, list[EvaluationReport]]
    stage1_digest: str


def eta_sweep(
    cfg: ExperimentConfig,
    fractions: list[float],
    repeats: int,
    out_dir: Path | str | None = None,
) -> SweepResult:
    """Rerun stages 2-3 over a grid of GA fractions on one shared stage-1 dataset.

    Repeats reuse the collected episodes and vary only the downstream seeds.
    """
    from dataclasses import replace

    if not fractions:
        raise ValueError("no fractions given")
    base = replace(cfg, mode="gaac")
    data = stage1_collect(base)
    digest = dataset.samples_digest(data.best_samples)

    reports: dict[float, list[EvaluationReport]] = {f: [] for f in fractions}
    for fraction in fractions:
        for repeat in range(repeats):
            run_seed = child_seed(cfg.seed, 9, repeat)
            run_cfg = replace(base, ga_fraction=fraction, seed=run_seed)
            if fraction > 0.0:
                stage2 = stage2_optimize(data.best_samples, run_cfg)
                pairs = stage2.pairs
            else:
                pairs = pairs_from_samples(data.best_samples)
            policy = stage3_train_policy(pairs, run_cfg)
            report, _ = evaluate(policy, cfg.eval_episodes, run_seed, max_steps=cfg.max_steps)
            reports[fraction].append(report)

    result = SweepResult(list(fractions), repeats, reports, digest)
    if out_dir is not None:
        write_sweep_artifacts(result, cfg, Path(out_dir))
    return result


def write_sweep_artifacts(result: SweepResult, cfg: ExperimentConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out_dir / "config.txt")
    lines = ["ga_fraction,episode,mean_reward,var_reward"]
    for fraction in result.fractions:
        reports = result.reports[fraction]
        per_episode = np.array([r.rewards for r in reports])  # (repeats, episodes)
        means = per_episode.mean(axis=0)
        variances = per_episode.var(axis=0)
        for i in range(per_episode.shape[1]):
            lines.append(f"{fraction!r},{i + 1},{float(means[i])!r},{float(variances[i])!r}")
    with open(out_dir / "sweep.csv", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(out_dir / "report.txt", "w") as fh:
        fh.write(f"stage1_digest = {result.stage1_digest}\n")
        for fraction in result.fractions:
            overall = [r.mean for r in result.reports[fraction]]
            fh.write(
                f"fraction_{fraction!r}_mean = {np.mean(overall):.4f}\n"
                f"fraction_{fraction!r}_std = {np.std(overall):.4f}\n"
            )
