"""Online actor-critic with a Gaussian policy and one-step TD updates.

The actor net maps a state to raw outputs [mean..., spread...]; the spread
half goes through a softplus head with a floor so the policy's standard
deviation stays positive. Per-step critic and actor updates follow the
scalar TD rule and the score-function rule on the Gaussian log density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import mlp
from .dataset import EpisodeRecord, Sample

SIGMA_FLOOR = 1e-3


@dataclass
class PolicyParams:
    """Gaussian policy parameters for one state: per-dimension mean and spread."""

    mu: np.ndarray
    sigma: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.mu, self.sigma])


def softplus(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def head_from_raw(raw: np.ndarray, action_dim: int) -> PolicyParams:
    """Split raw net output into mean and spread, flooring the spread at SIGMA_FLOOR."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape != (2 * action_dim,):
        raise ValueError(f"raw output shape {raw.shape} does not match action dim {action_dim}")
    mu = raw[:action_dim]
    sigma = np.maximum(softplus(raw[action_dim:]), SIGMA_FLOOR)
    return PolicyParams(mu, sigma)


# Affine input scaling for the Mountain Car state: position recentred on the
# track midpoint, velocity stretched to a comparable range. Without this the
# nets are nearly blind to velocity (raw range +-0.07), which makes
# momentum-based policies unlearnable at the small online learning rates.
MCC_STATE_OFFSET = (-0.3, 0.0)
MCC_STATE_SCALE = (0.9, 0.07)


@dataclass
class AcConfig:
    state_dim: int = 2
    action_dim: int = 1
    actor_hidden: tuple[int, ...] = (40, 40)
    critic_hidden: tuple[int, ...] = (400, 400)
    actor_lr: float = 1e-5
    critic_lr: float = 5.6e-4
    discount: float = 0.99
    hidden_activation: str = "tanh"
    state_offset: tuple[float, ...] = MCC_STATE_OFFSET
    state_scale: tuple[float, ...] = MCC_STATE_SCALE

    def __post_init__(self):
        if self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ValueError("learning rates must be positive")
        if not 0.0 < self.discount <= 1.0:
            raise ValueError(f"discount must be in (0, 1], got {self.discount}")
        if len(self.state_offset) != self.state_dim or len(self.state_scale) != self.state_dim:
            raise ValueError("state scaling length does not match state dim")


@dataclass
class AcState:
    """One learner: actor and critic nets plus their learning rates and discount."""

    actor: mlp.Mlp
    critic: mlp.Mlp
    actor_lr: float
    critic_lr: float
    discount: float
    action_dim: int
    state_offset: np.ndarray
    state_scale: np.ndarray

    def net_input(self, state: np.ndarray) -> np.ndarray:
        return (np.asarray(state, dtype=np.float64) - self.state_offset) / self.state_scale


def make_ac(cfg: AcConfig, seed: int) -> AcState:
    """Fresh Xavier-initialized actor and critic from one seed."""
    actor_spec = mlp.layer_chain(
        [cfg.state_dim, *cfg.actor_hidden, 2 * cfg.action_dim], cfg.hidden_activation
    )
    critic_spec = mlp.layer_chain([cfg.state_dim, *cfg.critic_hidden, 1], cfg.hidden_activation)
    seeds = np.random.SeedSequence(seed).generate_state(2)
    return AcState(
        actor=mlp.init_xavier(actor_spec, int(seeds[0])),
        critic=mlp.init_xavier(critic_spec, int(seeds[1])),
        actor_lr=cfg.actor_lr,
        critic_lr=cfg.critic_lr,
        discount=cfg.discount,
        action_dim=cfg.action_dim,
        state_offset=np.asarray(cfg.state_offset, dtype=np.float64),
        state_scale=np.asarray(cfg.state_scale, dtype=np.float64),
    )


def policy_params(ac: AcState, state: np.ndarray) -> PolicyParams:
    return head_from_raw(mlp.forward(ac.actor, ac.net_input(state)), ac.action_dim)


def sample_action(params: PolicyParams, rng: np.random.Generator) -> np.ndarray:
    return params.mu + params.sigma * rng.standard_normal(len(params.mu))


def log_density(params: PolicyParams, action: np.ndarray) -> float:
    """Log of the diagonal Gaussian density at the (unclipped) action."""
    a = np.asarray(action, dtype=np.float64)
    z = (a - params.mu) / params.sigma
    return float(np.sum(-0.5 * z * z - np.log(params.sigma) - 0.5 * math.log(2.0 * math.pi)))


def _log_density_raw_grad(raw: np.ndarray, action: np.ndarray, action_dim: int) -> np.ndarray:
    """d log-density / d raw-actor-output, chained through the spread head."""
    p = head_from_raw(raw, action_dim)
    a = np.asarray(action, dtype=np.float64)
    diff = a - p.mu
    d_mu = diff / (p.sigma**2)
    d_sigma = (diff**2 - p.sigma**2) / (p.sigma**3)
    # Head: sigma = max(softplus(z), floor). At the floor the gradient is zero.
    z = raw[action_dim:]
    sp = softplus(z)
    d_head = np.where(sp > SIGMA_FLOOR, 1.0 / (1.0 + np.exp(-z)), 0.0)
    return np.concatenate([d_mu, d_sigma * d_head])


def value(ac: AcState, state) -> float:
    return float(mlp.forward(ac.critic, ac.net_input(state))[0])


def td_error(ac: AcState, state, reward: float, next_state, terminal: bool) -> float:
    """One-step TD error with the bootstrap term masked at terminal transitions."""
    v_next = 0.0 if terminal else value(ac, next_state)
    return reward + ac.discount * v_next - value(ac, state)


_ONE = np.array([1.0])


def critic_update(ac: AcState, state, delta: float) -> AcState:
    """Move the value estimate at `state` along its own gradient, scaled by lr * delta."""
    if not math.isfinite(delta):
        raise ValueError(f"non-finite TD error {delta!r}")
    mlp.apply_rank1_update(ac.critic, ac.net_input(state), _ONE, ac.critic_lr * delta)
    return ac


def actor_update(ac: AcState, state, action, delta: float) -> AcState:
    """Score-function update: actor weights += lr * delta * grad log-density."""
    if not math.isfinite(delta):
        raise ValueError(f"non-finite TD error {delta!r}")
    net_in = ac.net_input(state)
    raw = mlp.forward(ac.actor, net_in)
    upstream = _log_density_raw_grad(raw, action, ac.action_dim)
    mlp.apply_rank1_update(ac.actor, net_in, upstream, ac.actor_lr * delta)
    return ac


def run_ac_round(
    env,
    round_seed: int,
    episodes: int,
    cfg: AcConfig,
    round_idx: int = 1,
    max_steps: int = 1000,
    first_episode_idx: int = 1,
    abort_if_no_goal_by: int | None = None,
) -> list[EpisodeRecord]:
    """Run one independent learning round: fresh nets, `episodes` episodes, per-step updates.

    Every step records a Sample whose parameters are the actor output the agent
    acted from (captured before that step's update) and whose TD error is the
    delta used for the updates. Episodes are numbered from `first_episode_idx`
    so rounds can carry run-global episode indices. With `abort_if_no_goal_by`,
    the round returns early (with fewer records than asked) if no episode has
    reached the goal after that many episodes - the stuck-run shortcut.
    """
    if episodes < 1:
        raise ValueError("need at least one episode per round")
    seeds = np.random.SeedSequence(round_seed).generate_state(2)
    ac = make_ac(cfg, int(seeds[0]))
    rng = np.random.default_rng(int(seeds[1]))

    records = []
    for ep in range(first_episode_idx, first_episode_idx + episodes):
        state = env.reset(rng)
        samples: list[Sample] = []
        total = 0.0
        reached = False
        for t in range(1, max_steps + 1):
            s_vec = state.as_array()
            params = policy_params(ac, s_vec)
            action = sample_action(params, rng)
            result = env.step(state, float(action[0]))
            delta = td_error(ac, s_vec, result.reward, result.next_state.as_array(), result.done)
            samples.append(Sample(s_vec, params.flat(), delta, round_idx, ep, t))
            critic_update(ac, s_vec, delta)
            actor_update(ac, s_vec, action, delta)
            total += result.reward
            state = result.next_state
            if result.done:
                reached = True
                break
        records.append(EpisodeRecord(samples, total, reached, round_idx, ep))
        if (
            abort_if_no_goal_by is not None
            and len(records) >= abort_if_no_goal_by
            and not any(r.reached_goal for r in records)
        ):
            break
    return records
