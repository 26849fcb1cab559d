from dataclasses import replace

import numpy as np
import pytest

from gaac import dataset, pfm, pipeline
from gaac.dataset import OptimizedPair


class TestStage1:
    def test_episode_and_round_counts(self, tiny_cfg):
        data = pipeline.stage1_collect(tiny_cfg)
        assert len(data.rounds) == tiny_cfg.rounds
        assert len(data.all_episodes) == tiny_cfg.total_episodes
        assert len(data.best_episodes) == tiny_cfg.rounds

    def test_env_steps_accounting(self, tiny_cfg):
        data = pipeline.stage1_collect(tiny_cfg)
        assert data.env_steps == sum(len(ep) for ep in data.all_episodes)
        assert len(data.all_samples) == data.env_steps

    def test_deterministic(self, tiny_cfg):
        a = pipeline.stage1_collect(tiny_cfg)
        b = pipeline.stage1_collect(tiny_cfg)
        assert dataset.samples_digest(a.best_samples) == dataset.samples_digest(b.best_samples)

    def test_single_run_modes_use_one_round(self, tiny_cfg):
        cfg = replace(tiny_cfg, mode="ac")
        data = pipeline.stage1_collect(cfg)
        assert len(data.rounds) == 1
        assert len(data.all_episodes) == cfg.total_episodes
        assert data.best_samples is data.all_samples

    def test_unreachable_mixture_raises(self, tiny_cfg):
        cfg = replace(tiny_cfg, success_min=tiny_cfg.rounds + 1, stage1_attempts=2)
        with pytest.raises(RuntimeError):
            pipeline.stage1_collect(cfg)

    def test_global_episode_indices(self, tiny_cfg):
        cfg = replace(tiny_cfg, episodes_per_round=2)
        data = pipeline.stage1_collect(cfg)
        indices = [ep.episode_idx for ep in data.all_episodes]
        assert indices == list(range(1, cfg.total_episodes + 1))


class TestStage2:
    def test_zero_fraction_leaves_dataset_untouched(self, tiny_cfg):
        cfg = replace(tiny_cfg, ga_fraction=0.0)
        data = pipeline.stage1_collect(cfg)
        result = pipeline.stage2_optimize(data.best_samples, cfg)
        assert len(result.pairs) == len(data.best_samples)
        assert not any(p.was_updated for p in result.pairs)
        for pair, sample in zip(result.pairs, data.best_samples):
            assert np.array_equal(pair.params, sample.params)

    def test_updated_tuples_never_regress(self, tiny_cfg):
        data = pipeline.stage1_collect(tiny_cfg)
        result = pipeline.stage2_optimize(data.best_samples, tiny_cfg)
        assert len(result.chosen_idx) == int(tiny_cfg.ga_fraction * len(data.best_samples))
        assert result.ga_results
        for ga_result in result.ga_results.values():
            assert ga_result.best_fitness >= ga_result.seed_fitness
        # and the model agrees with the recorded fitness values
        for idx, ga_result in result.ga_results.items():
            sample = data.best_samples[idx]
            predicted = pfm.predict(result.model, sample.state, ga_result.best_params)
            assert predicted == pytest.approx(ga_result.best_fitness, abs=1e-9)

    def test_pair_count_always_matches_dataset(self, tiny_cfg):
        data = pipeline.stage1_collect(tiny_cfg)
        result = pipeline.stage2_optimize(data.best_samples, tiny_cfg)
        assert len(result.pairs) == len(data.best_samples)
        assert sum(p.was_updated for p in result.pairs) == len(result.chosen_idx)


class TestStage3:
    def test_policy_head_dimensions(self, tiny_cfg):
        data = pipeline.stage1_collect(tiny_cfg)
        policy = pipeline.stage3_train_policy(pipeline.pairs_from_samples(data.best_samples), tiny_cfg)
        params = policy.params(np.array([-0.5, 0.0]))
        assert params.mu.shape == (1,) and params.sigma.shape == (1,)
        assert params.sigma[0] >= 1e-3

    def test_loss_decreases(self, tiny_cfg):
        cfg = replace(tiny_cfg, policy_epochs=30)
        data = pipeline.stage1_collect(cfg)
        policy = pipeline.stage3_train_policy(pipeline.pairs_from_samples(data.best_samples), cfg)
        assert policy.loss_history[-1] < policy.loss_history[0]

    def test_constant_target_regression(self, tiny_cfg):
        # a constant parameter vector must be recovered anywhere in range
        rng = np.random.default_rng(0)
        target = np.array([0.4, 0.6])
        pairs = [
            OptimizedPair(np.array([rng.uniform(-1.2, 0.6), rng.uniform(-0.07, 0.07)]), target, False)
            for _ in range(300)
        ]
        cfg = replace(tiny_cfg, policy_epochs=1000, policy_lr=3e-2)
        policy = pipeline.stage3_train_policy(pairs, cfg)
        for _ in range(20):
            s = np.array([rng.uniform(-1.2, 0.6), rng.uniform(-0.07, 0.07)])
            predicted = policy.params(s)
            assert abs(predicted.mu[0] - 0.4) < 0.05
            assert abs(predicted.sigma[0] - 0.6) < 0.05

    def test_rejects_empty_dataset(self, tiny_cfg):
        with pytest.raises(ValueError):
            pipeline.stage3_train_policy([], tiny_cfg)

    def test_save_load_round_trip(self, tiny_cfg, tmp_path):
        data = pipeline.stage1_collect(tiny_cfg)
        policy = pipeline.stage3_train_policy(pipeline.pairs_from_samples(data.best_samples), tiny_cfg)
        path = tmp_path / "policy.txt"
        policy.save(path)
        loaded = pipeline.PolicyModel.load(path)
        s = np.array([-0.5, 0.01])
        assert np.array_equal(loaded.params(s).flat(), policy.params(s).flat())


class TestEvaluate:
    def test_report_consistency(self, tiny_cfg):
        data = pipeline.stage1_collect(tiny_cfg)
        policy = pipeline.stage3_train_policy(pipeline.pairs_from_samples(data.best_samples), tiny_cfg)
        report, best = pipeline.evaluate(policy, 5, master_seed=1, max_steps=40)
        assert len(report.rewards) == 5
        assert report.mean == pytest.approx(float(np.mean(report.rewards)))
        assert report.std == pytest.approx(float(np.std(report.rewards)))
        assert report.failed == sum(1 for r in report.reached if not r)
        assert best.cumulative_reward == max(report.rewards)

    def test_deterministic(self, tiny_cfg):
        data = pipeline.stage1_collect(tiny_cfg)
        policy = pipeline.stage3_train_policy(pipeline.pairs_from_samples(data.best_samples), tiny_cfg)
        a, _ = pipeline.evaluate(policy, 4, master_seed=9, max_steps=40)
        b, _ = pipeline.evaluate(policy, 4, master_seed=9, max_steps=40)
        assert a.rewards == b.rewards


class TestRunMode:
    def test_beo_equals_gaac_with_zero_fraction(self, tiny_cfg):
        gaac_zero = pipeline.run_mode(replace(tiny_cfg, mode="gaac", ga_fraction=0.0))
        beo = pipeline.run_mode(replace(tiny_cfg, mode="ac_beo"))
        assert gaac_zero.report.rewards == beo.report.rewards

    def test_all_modes_produce_reports(self, tiny_cfg):
        for mode in ("ac", "ac_ga", "ac_beo", "gaac"):
            result = pipeline.run_mode(replace(tiny_cfg, mode=mode))
            assert len(result.report.rewards) == tiny_cfg.eval_episodes

    def test_artifacts_written(self, tiny_cfg, tmp_path):
        out = tmp_path / "run"
        pipeline.run_mode(tiny_cfg, out_dir=out)
        for name in (
            "config.txt", "samples_all.csv", "samples_retained.csv", "pairs_optimized.csv",
            "pfm.txt", "policy.txt", "rewards.csv", "trajectory_best_eval.csv", "report.txt", "ga_log.csv",
        ):
            assert (out / name).exists(), name
        lines = (out / "rewards.csv").read_text().strip().splitlines()
        assert lines[0] == "episode,reward,phase"
        assert len(lines) == 1 + tiny_cfg.total_episodes + tiny_cfg.eval_episodes

    def test_ablation_shares_collection(self, tiny_cfg, tmp_path):
        results = pipeline.run_ablation(tiny_cfg, out_dir=tmp_path / "ablation")
        assert set(results) == {"ac", "ac_ga", "ac_beo", "gaac"}
        assert dataset.samples_digest(results["gaac"].stage1.best_samples) == dataset.samples_digest(
            results["ac_beo"].stage1.best_samples
        )
        assert dataset.samples_digest(results["ac"].stage1.all_samples) == dataset.samples_digest(
            results["ac_ga"].stage1.all_samples
        )


class TestEtaSweep:
    def test_shapes_and_shared_stage1(self, tiny_cfg, tmp_path):
        result = pipeline.eta_sweep(tiny_cfg, [0.0, 0.5], repeats=2, out_dir=tmp_path / "sweep")
        assert set(result.reports) == {0.0, 0.5}
        assert all(len(reports) == 2 for reports in result.reports.values())
        assert result.stage1_digest
        sweep_lines = (tmp_path / "sweep" / "sweep.csv").read_text().strip().splitlines()
        assert sweep_lines[0] == "ga_fraction,episode,mean_reward,var_reward"
        assert len(sweep_lines) == 1 + 2 * tiny_cfg.eval_episodes

    def test_rejects_empty_fraction_list(self, tiny_cfg):
        with pytest.raises(ValueError):
            pipeline.eta_sweep(tiny_cfg, [], repeats=1)
