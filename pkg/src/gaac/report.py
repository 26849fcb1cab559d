"""Plot-data export: delimited bundles plus rendered figures from run directories.

Reads the artifacts a finished run left behind and writes tidy CSVs next to
PNG renderings of the same data: reward-vs-episode (one series per mode),
the best evaluation rollout in the position/velocity plane, and the GA
fraction sweep with its variance band.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


class MissingArtifact(FileNotFoundError):
    """A run directory lacks a file the export needs."""


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    if not path.exists():
        raise MissingArtifact(f"missing artifact: {path}")
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


def _find_mode_dirs(run_dir: Path) -> dict[str, Path]:
    """A run dir either is a single run or holds one subdirectory per mode."""
    if (run_dir / "rewards.csv").exists():
        mode = "run"
        cfg = run_dir / "config.txt"
        if cfg.exists():
            for ln in cfg.read_text().splitlines():
                if ln.startswith("mode"):
                    mode = ln.split("=", 1)[1].strip()
        return {mode: run_dir}
    subs = {p.name: p for p in sorted(run_dir.iterdir()) if (p / "rewards.csv").exists()}
    if not subs:
        raise MissingArtifact(f"missing artifact: {run_dir}/rewards.csv (no run found)")
    return subs


def emit_plot_data(run_dir: Path | str, out_dir: Path | str | None = None) -> list[Path]:
    """Write the CSV bundles and figures for a completed run directory.

    Returns the list of files written. Existing artifacts are never modified;
    outputs land in a `plots/` subdirectory (or `out_dir`).
    """
    run_dir = Path(run_dir)
    out = Path(out_dir) if out_dir is not None else run_dir / "plots"
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    sweep_only = (run_dir / "sweep.csv").exists() and not (run_dir / "rewards.csv").exists()
    modes = {} if sweep_only else _find_mode_dirs(run_dir)

    if modes:
        # Reward vs episode, one series per mode, train and eval phases kept apart.
        lines = ["mode,phase,episode,reward"]
        series: dict[tuple[str, str], list[tuple[int, float]]] = {}
        for mode, mdir in modes.items():
            _, rows = _read_csv(mdir / "rewards.csv")
            for episode, reward, phase in rows:
                series.setdefault((mode, phase), []).append((int(episode), float(reward)))
                lines.append(f"{mode},{phase},{episode},{reward}")
        rewards_csv = out / "reward_vs_episode.csv"
        rewards_csv.write_text("\n".join(lines) + "\n")
        written.append(rewards_csv)

        fig, ax = plt.subplots(figsize=(8, 5))
        for (mode, phase), points in sorted(series.items()):
            xs = [p[0] for p in points]
            ys = [p[1] for p in points]
            style = "o" if phase == "train" else "."
            ax.plot(xs, ys, style, markersize=3, label=f"{mode} ({phase})")
        ax.set_xlabel("Episode")
        ax.set_ylabel("Cumulative reward")
        ax.set_title("Cumulative reward vs episode")
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        rewards_png = out / "reward_vs_episode.png"
        fig.savefig(rewards_png, dpi=150)
        plt.close(fig)
        written.append(rewards_png)

        # Best evaluation trajectory per mode, if any run kept one.
        traj_rows = ["mode,t,x,y,a,r,done"]
        fig, ax = plt.subplots(figsize=(8, 5))
        have_traj = False
        for mode, mdir in modes.items():
            path = mdir / "trajectory_best_eval.csv"
            if not path.exists():
                continue
            have_traj = True
            _, rows = _read_csv(path)
            xs = [float(r[1]) for r in rows]
            ys = [float(r[2]) for r in rows]
            ax.plot(xs, ys, ".", markersize=3, label=mode)
            for r in rows:
                traj_rows.append(f"{mode}," + ",".join(r))
        if have_traj:
            traj_csv = out / "trajectory.csv"
            traj_csv.write_text("\n".join(traj_rows) + "\n")
            written.append(traj_csv)
            ax.axvline(0.45, color="black", linewidth=1, alpha=0.6, label="goal position")
            ax.set_xlabel("Position")
            ax.set_ylabel("Velocity")
            ax.set_title("Best evaluation rollout")
            ax.grid(True, alpha=0.3)
            ax.legend()
            fig.tight_layout()
            traj_png = out / "trajectory.png"
            fig.savefig(traj_png, dpi=150)
            written.append(traj_png)
        plt.close(fig)

    # GA-fraction sweep, when the directory came from a sweep run.
    sweep_path = run_dir / "sweep.csv"
    if sweep_path.exists():
        _, rows = _read_csv(sweep_path)
        sweep_csv = out / "fraction_sweep.csv"
        sweep_csv.write_text(sweep_path.read_text())
        written.append(sweep_csv)

        by_fraction: dict[float, list[tuple[int, float, float]]] = {}
        for fraction, episode, mean, var in rows:
            by_fraction.setdefault(float(fraction), []).append((int(episode), float(mean), float(var)))
        fig, ax = plt.subplots(figsize=(8, 5))
        for fraction, points in sorted(by_fraction.items()):
            points.sort()
            xs = np.array([p[0] for p in points])
            means = np.array([p[1] for p in points])
            stds = np.sqrt(np.array([p[2] for p in points]))
            ax.plot(xs, means, label=f"fraction {fraction:g}")
            ax.fill_between(xs, means - stds, means + stds, alpha=0.2)
        ax.set_xlabel("Evaluation episode")
        ax.set_ylabel("Cumulative reward")
        ax.set_title("GA-optimized fraction sweep")
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        sweep_png = out / "fraction_sweep.png"
        fig.savefig(sweep_png, dpi=150)
        plt.close(fig)
        written.append(sweep_png)

    return written
