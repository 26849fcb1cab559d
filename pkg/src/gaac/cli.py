"""Command-line entry point.

One subcommand per pipeline stage plus whole-experiment drivers. Every run
announces its master seed on stderr and writes into a fresh output directory;
existing run directories are never modified (plot exports only add files).

Exit codes: 0 success, 1 usage error, 2 config error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import dataset, pfm, pipeline, report
from .config import ConfigError, ExperimentConfig, dump_config, parse_config


def _load_config(args) -> ExperimentConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "mode", None) is not None:
        overrides["mode"] = args.mode
    if args.config is not None:
        return parse_config(args.config, overrides)
    cfg = ExperimentConfig()
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg.validate()


def _fresh_dir(path: Path) -> Path:
    if path.exists() and any(path.iterdir()):
        raise UsageError(f"output directory {path} already exists and is not empty")
    path.mkdir(parents=True, exist_ok=True)
    return path


class UsageError(Exception):
    pass


def _announce_seed(cfg: ExperimentConfig) -> None:
    print(f"master seed: {cfg.seed}", file=sys.stderr)


def cmd_collect(args) -> int:
    cfg = _load_config(args)
    _announce_seed(cfg)
    out = _fresh_dir(Path(args.out))
    data = pipeline.stage1_collect(cfg)
    dump_config(cfg, out / "config.txt")
    dataset.save_samples(data.all_samples, out / "samples_all.csv")
    if cfg.mode in ("gaac", "ac_beo"):
        dataset.save_samples(data.best_samples, out / "samples_retained.csv")
    rows = [(ep.episode_idx, ep.cumulative_reward, "train") for ep in data.all_episodes]
    pipeline.write_rewards_csv(rows, out / "rewards.csv")
    with open(out / "report.txt", "w") as fh:
        fh.write(
            f"mode = {cfg.mode}\nmaster_seed = {cfg.seed}\n"
            f"stage1_attempts_used = {data.attempts}\n"
            f"episodes = {len(data.all_episodes)}\nenv_steps = {data.env_steps}\n"
            f"retained_episodes = {len(data.best_episodes)}\n"
            f"retained_goal_episodes = {data.successes}\n"
            f"retained_samples = {len(data.best_samples)}\n"
        )
    print(f"collected {len(data.best_samples)} retained samples from {len(data.all_episodes)} episodes")
    return 0


def cmd_train_pfm(args) -> int:
    cfg = _load_config(args)
    _announce_seed(cfg)
    out = _fresh_dir(Path(args.out))
    samples = dataset.load_samples(args.samples)
    if args.cross_validate or cfg.pfm_cross_validate:
        cv = pfm.cross_validate(samples, cfg.pfm_cv_folds, cfg.pfm_cv_repeats, seed=cfg.seed, cfg=cfg.pfm_config())
        model = cv.model
        with open(out / "cv_scores.csv", "w") as fh:
            fh.write("config,repeat,fold,val_mse\n")
            for key, table in cv.scores.items():
                for r, row in enumerate(table):
                    for f, value in enumerate(row):
                        fh.write(f"\"{key}\",{r},{f},{float(value)!r}\n")
        print(f"cross-validation selected {cv.best_config}")
    else:
        model = pfm.train_pfm(samples, cfg.pfm_config(), seed=cfg.seed)
    pfm.save_pfm(model, out / "pfm.txt")
    with open(out / "pfm_loss.csv", "w") as fh:
        fh.write("epoch,mse\n")
        fh.writelines(f"{i},{v!r}\n" for i, v in enumerate(model.loss_history))
    print(f"final training mse: {model.final_mse:.6f}")
    return 0


def cmd_optimize(args) -> int:
    cfg = _load_config(args)
    _announce_seed(cfg)
    out = _fresh_dir(Path(args.out))
    samples = dataset.load_samples(args.samples)
    result = pipeline.stage2_optimize(samples, cfg)
    dataset.save_pairs(result.pairs, out / "pairs_optimized.csv")
    pfm.save_pfm(result.model, out / "pfm.txt")
    pipeline.write_ga_log(result, out / "ga_log.csv")
    print(
        f"optimized {len(result.chosen_idx)} of {len(samples)} samples; "
        f"strictly improved: {result.improved_fraction:.1%}"
    )
    return 0


def cmd_train_policy(args) -> int:
    cfg = _load_config(args)
    _announce_seed(cfg)
    out = _fresh_dir(Path(args.out))
    pairs = dataset.load_pairs(args.pairs)
    policy = pipeline.stage3_train_policy(pairs, cfg)
    policy.save(out / "policy.txt")
    with open(out / "policy_loss.csv", "w") as fh:
        fh.write("epoch,mse\n")
        fh.writelines(f"{i},{v!r}\n" for i, v in enumerate(policy.loss_history))
    print(f"final training mse: {policy.loss_history[-1]:.6f}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    _announce_seed(cfg)
    out = _fresh_dir(Path(args.out))
    policy = pipeline.PolicyModel.load(args.policy)
    rep, best = pipeline.evaluate(policy, cfg.eval_episodes, cfg.seed, max_steps=cfg.max_steps)
    rows = [(i, r, "eval") for i, r in enumerate(rep.rewards, start=1)]
    pipeline.write_rewards_csv(rows, out / "rewards.csv")
    from . import env

    env.dump_trajectory(best, out / "trajectory_best_eval.csv")
    with open(out / "report.txt", "w") as fh:
        fh.write(
            f"eval_episodes = {len(rep.rewards)}\neval_mean = {rep.mean:.4f}\n"
            f"eval_std = {rep.std:.4f}\neval_failed = {rep.failed}\n"
        )
    print(f"eval mean {rep.mean:.3f} +- {rep.std:.3f}, {rep.failed} failed of {len(rep.rewards)}")
    return 0


def cmd_run(args) -> int:
    cfg = _load_config(args)
    _announce_seed(cfg)
    out = _fresh_dir(Path(args.out))
    result = pipeline.run_mode(cfg, out_dir=out)
    rep = result.report
    print(f"{cfg.mode}: eval mean {rep.mean:.3f} +- {rep.std:.3f}, {rep.failed} failed of {len(rep.rewards)}")
    return 0


def cmd_ablation(args) -> int:
    cfg = _load_config(args)
    _announce_seed(cfg)
    out = _fresh_dir(Path(args.out))
    results = pipeline.run_ablation(cfg, out_dir=out)
    for mode, result in results.items():
        rep = result.report
        print(f"{mode}: eval mean {rep.mean:.3f} +- {rep.std:.3f}, {rep.failed} failed")
    return 0


def cmd_eta_sweep(args) -> int:
    cfg = _load_config(args)
    _announce_seed(cfg)
    out = _fresh_dir(Path(args.out))
    try:
        fractions = [float(v) for v in args.fractions.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad fractions list {args.fractions!r}") from None
    if not fractions:
        raise UsageError("empty fractions list")
    result = pipeline.eta_sweep(cfg, fractions, args.repeats, out_dir=out)
    for fraction in fractions:
        means = [r.mean for r in result.reports[fraction]]
        print(f"fraction {fraction:g}: mean of means {sum(means) / len(means):.3f}")
    return 0


def cmd_plot_data(args) -> int:
    out_dir = Path(args.out) if args.out else None
    written = report.emit_plot_data(Path(args.run_dir), out_dir)
    for path in written:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaac", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("-c", "--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, help="master seed override")
        if needs_out:
            p.add_argument("-o", "--out", required=True, help="fresh output directory")

    p = sub.add_parser("collect", help="stage 1: gather episodes and retain the per-round best")
    common(p)
    p.add_argument("--mode", choices=["ac", "ac_ga", "ac_beo", "gaac"])
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train-pfm", help="stage 2a: fit the parameter-fitness regressor")
    common(p)
    p.add_argument("-i", "--samples", required=True, help="samples CSV from collect")
    p.add_argument("--cross-validate", action="store_true")
    p.set_defaults(func=cmd_train_pfm)

    p = sub.add_parser("optimize", help="stage 2b: GA-rewrite a fraction of the dataset")
    common(p)
    p.add_argument("-i", "--samples", required=True, help="samples CSV from collect")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("train-policy", help="stage 3: regress the final Gaussian policy")
    common(p)
    p.add_argument("-i", "--pairs", required=True, help="pairs CSV from optimize")
    p.set_defaults(func=cmd_train_policy)

    p = sub.add_parser("evaluate", help="roll out a trained policy")
    common(p)
    p.add_argument("-p", "--policy", required=True, help="policy file from train-policy")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="full pipeline in one mode")
    common(p)
    p.add_argument("--mode", choices=["ac", "ac_ga", "ac_beo", "gaac"])
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ablation", help="all four modes with shared collection")
    common(p)
    p.set_defaults(func=cmd_ablation)

    p = sub.add_parser("eta-sweep", help="rerun stages 2-3 over a grid of GA fractions")
    common(p)
    p.add_argument("--fractions", default="0,0.15,0.25,0.5", help="comma-separated fractions")
    p.add_argument("--repeats", type=int, default=5)
    p.set_defaults(func=cmd_eta_sweep)

    p = sub.add_parser("plot-data", help="export CSV bundles and figures from a run directory")
    p.add_argument("-i", "--run-dir", required=True)
    p.add_argument("-o", "--out", help="where to write (default: <run-dir>/plots)")
    p.set_defaults(func=cmd_plot_data)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except report.MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
