from pathlib import Path

import pytest

from gaac.cli import main


def run_cli(*args):
    return main([str(a) for a in args])


class TestRun:
    def test_full_run_and_artifacts(self, tiny_cfg_file, tmp_path, capsys):
        out = tmp_path / "run"
        assert run_cli("run", "-c", tiny_cfg_file, "-o", out) == 0
        captured = capsys.readouterr()
        assert "master seed: 7" in captured.err
        assert "eval mean" in captured.out
        assert (out / "rewards.csv").exists()
        assert (out / "report.txt").exists()

    def test_identical_runs_byte_identical_rewards(self, tiny_cfg_file, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli("run", "-c", tiny_cfg_file, "-o", a) == 0
        assert run_cli("run", "-c", tiny_cfg_file, "-o", b) == 0
        assert (a / "rewards.csv").read_bytes() == (b / "rewards.csv").read_bytes()

    def test_refuses_nonempty_output_dir(self, tiny_cfg_file, tmp_path):
        out = tmp_path / "busy"
        out.mkdir()
        (out / "existing.txt").write_text("keep me\n")
        assert run_cli("run", "-c", tiny_cfg_file, "-o", out) == 1
        assert (out / "existing.txt").read_text() == "keep me\n"

    def test_mode_override(self, tiny_cfg_file, tmp_path):
        out = tmp_path / "beo"
        assert run_cli("run", "-c", tiny_cfg_file, "--mode", "ac_beo", "-o", out) == 0
        assert "mode = ac_beo" in (out / "config.txt").read_text()

    def test_seed_override_changes_results(self, tiny_cfg_file, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli("run", "-c", tiny_cfg_file, "-o", a) == 0
        assert run_cli("run", "-c", tiny_cfg_file, "--seed", "8", "-o", b) == 0
        assert (a / "rewards.csv").read_bytes() != (b / "rewards.csv").read_bytes()


class TestStageChain:
    def test_collect_to_evaluate(self, tiny_cfg_file, tmp_path):
        c = tmp_path / "collect"
        assert run_cli("collect", "-c", tiny_cfg_file, "-o", c) == 0
        samples = c / "samples_retained.csv"
        assert samples.exists()

        p = tmp_path / "pfm"
        assert run_cli("train-pfm", "-c", tiny_cfg_file, "-i", samples, "-o", p) == 0
        assert (p / "pfm.txt").exists()
        assert (p / "pfm_loss.csv").exists()

        o = tmp_path / "opt"
        assert run_cli("optimize", "-c", tiny_cfg_file, "-i", samples, "-o", o) == 0
        pairs = o / "pairs_optimized.csv"
        assert pairs.exists()
        assert (o / "ga_log.csv").exists()

        t = tmp_path / "policy"
        assert run_cli("train-policy", "-c", tiny_cfg_file, "-i", pairs, "-o", t) == 0
        policy = t / "policy.txt"
        assert policy.exists()

        e = tmp_path / "eval"
        assert run_cli("evaluate", "-c", tiny_cfg_file, "-p", policy, "-o", e) == 0
        lines = (e / "rewards.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 3  # header + eval_episodes
        assert all(ln.endswith(",eval") for ln in lines[1:])


class TestAblationAndSweep:
    def test_ablation_runs_all_modes(self, tiny_cfg_file, tmp_path):
        out = tmp_path / "ablation"
        assert run_cli("ablation", "-c", tiny_cfg_file, "-o", out) == 0
        for mode in ("ac", "ac_ga", "ac_beo", "gaac"):
            assert (out / mode / "rewards.csv").exists()

    def test_eta_sweep(self, tiny_cfg_file, tmp_path):
        out = tmp_path / "sweep"
        assert run_cli("eta-sweep", "-c", tiny_cfg_file, "--fractions", "0,0.5", "--repeats", "2", "-o", out) == 0
        assert (out / "sweep.csv").exists()


class TestPlotData:
    def test_exports_csv_and_figures(self, tiny_cfg_file, tmp_path):
        out = tmp_path / "run"
        assert run_cli("run", "-c", tiny_cfg_file, "-o", out) == 0
        assert run_cli("plot-data", "-i", out) == 0
        plots = out / "plots"
        assert (plots / "reward_vs_episode.csv").exists()
        assert (plots / "reward_vs_episode.png").exists()
        assert (plots / "trajectory.csv").exists()
        assert (plots / "trajectory.png").exists()

    def test_sweep_figures(self, tiny_cfg_file, tmp_path):
        out = tmp_path / "sweep"
        assert run_cli("eta-sweep", "-c", tiny_cfg_file, "--fractions", "0,0.5", "--repeats", "1", "-o", out) == 0
        assert run_cli("plot-data", "-i", out) == 0
        assert (out / "plots" / "fraction_sweep.csv").exists()
        assert (out / "plots" / "fraction_sweep.png").exists()

    def test_incomplete_run_names_missing_artifact(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert run_cli("plot-data", "-i", empty) == 3
        assert "rewards.csv" in capsys.readouterr().err


class TestExitCodes:
    def test_usage_error_is_1(self, tmp_path):
        assert run_cli("frobnicate") == 1

    def test_config_error_is_2(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("discount = 2.0\n")
        assert run_cli("run", "-c", bad, "-o", tmp_path / "x") == 2

    def test_runtime_failure_is_3(self, tiny_cfg_file, tmp_path):
        assert run_cli("train-policy", "-c", tiny_cfg_file, "-i", tmp_path / "missing.csv", "-o", tmp_path / "y") == 3
