import pytest

from gaac.config import ExperimentConfig


@pytest.fixture
def tiny_cfg():
    """Config scaled down for fast end-to-end tests."""
    return ExperimentConfig(
        mode="gaac",
        seed=7,
        rounds=2,
        episodes_per_round=1,
        max_steps=60,
        critic_hidden=(16, 16),
        actor_hidden=(8, 8),
        ga_fraction=0.25,
        population_size=10,
        parent_pairs=4,
        max_generations=3,
        pfm_hidden=(8, 8),
        pfm_epochs=5,
        policy_hidden=(8, 8),
        policy_epochs=5,
        eval_episodes=3,
        workers=1,
    ).validate()


TINY_CONFIG_TEXT = """\
mode = gaac
seed = 7
rounds = 2
episodes_per_round = 1
max_steps = 60
critic_hidden = 16,16
actor_hidden = 8,8
ga_fraction = 0.25
population_size = 10
parent_pairs = 4
max_generations = 3
pfm_hidden = 8,8
pfm_epochs = 5
policy_hidden = 8,8
policy_epochs = 5
eval_episodes = 3
workers = 1
"""


@pytest.fixture
def tiny_cfg_file(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY_CONFIG_TEXT)
    return path
