"""Native Mountain Car Continuous environment.

An underactuated car in a valley must swing back and forth to build enough
momentum to reach the flag on the right hill. Transition constants follow the
classic public reference environment; the reward is -0.1 * clipped_action^2
per step off-goal and exactly +100 on the goal step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

X_MIN, X_MAX = -1.2, 0.6
V_MIN, V_MAX = -0.07, 0.07
GOAL_X = 0.45
FORCE_SCALE = 0.0015
GRAVITY_SCALE = 0.0025
RESET_X_LOW, RESET_X_HIGH = -0.6, -0.4
ACTION_LOW, ACTION_HIGH = -1.0, 1.0
MAX_EPISODE_STEPS = 1000

STATE_DIM = 2
ACTION_DIM = 1


class McState(NamedTuple):
    x: float  # position in [X_MIN, X_MAX]
    y: float  # velocity in [V_MIN, V_MAX]

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


class StepResult(NamedTuple):
    next_state: McState
    reward: float
    done: bool


def reset(rng: np.random.Generator) -> McState:
    """Start at a uniform position in [-0.6, -0.4] with zero velocity."""
    return McState(float(rng.uniform(RESET_X_LOW, RESET_X_HIGH)), 0.0)


def step(state: McState, action: float) -> StepResult:
    """Advance one step; the action is clipped to [-1, 1] before use."""
    a = float(action)
    if not math.isfinite(a):
        raise ValueError(f"non-finite action {a!r}")
    a = min(max(a, ACTION_LOW), ACTION_HIGH)

    y = state.y + FORCE_SCALE * a - GRAVITY_SCALE * math.cos(3.0 * state.x)
    y = min(max(y, V_MIN), V_MAX)
    x = min(max(state.x + y, X_MIN), X_MAX)
    if x == X_MIN and y < 0.0:
        y = 0.0

    done = x >= GOAL_X
    reward = 100.0 if done else -0.1 * a * a
    return StepResult(McState(x, y), reward, done)


# Policy signature used throughout: (state vector, rng) -> scalar action.
Policy = Callable[[np.ndarray, np.random.Generator], float]


@dataclass
class Trajectory:
    """States, actions and rewards of one rollout; states has one extra final entry."""

    states: list[McState]
    actions: list[float] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    reached_goal: bool = False

    @property
    def cumulative_reward(self) -> float:
        return float(sum(self.rewards))

    def __len__(self) -> int:
        return len(self.actions)


def run_episode(policy: Policy, rng: np.random.Generator, max_steps: int = MAX_EPISODE_STEPS) -> Trajectory:
    """Roll the policy out from a fresh reset until the goal or max_steps."""
    state = reset(rng)
    traj = Trajectory(states=[state])
    for _ in range(max_steps):
        action = float(policy(state.as_array(), rng))
        result = step(state, action)
        traj.actions.append(action)
        traj.rewards.append(result.reward)
        traj.states.append(result.next_state)
        state = result.next_state
        if result.done:
            traj.reached_goal = True
            break
    return traj


def dump_trajectory(traj: Trajectory, path) -> None:
    """One CSV line per step: t,x,y,a,r,done (x,y are the post-step state)."""
    lines = ["t,x,y,a,r,done"]
    for t in range(len(traj)):
        s = traj.states[t + 1]
        done = traj.reached_goal and t == len(traj) - 1
        lines.append(f"{t + 1},{s.x!r},{s.y!r},{traj.actions[t]!r},{traj.rewards[t]!r},{int(done)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
