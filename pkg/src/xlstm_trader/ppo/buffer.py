"""Rollout storage with recurrent-state snapshots for truncated BPTT."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..env import TradingEnv
from ..errors import ContractError
from ..policy import PolicyConfig, PolicyParams, RecurrentPolicyState, act


@dataclass
class RolloutBuffer:
    """Per-step transitions plus the policy state at each sequence start.

    ``snapshots[t]`` is the recurrent state *before* step t; one exists at
    index 0, at every episode start and every ``seq_len`` steps within an
    episode. :meth:`segments` turns these into training subsequences.
    """

    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    values: np.ndarray
    log_probs: np.ndarray
    episode_starts: np.ndarray
    snapshots: dict[int, RecurrentPolicyState]
    bootstrap_value: float
    episode_returns: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rewards)

    def segments(self) -> list[tuple[int, int]]:
        """Half-open [start, stop) ranges, one per snapshot, never crossing an episode."""
        starts = sorted(self.snapshots)
        return [(s, e) for s, e in zip(starts, starts[1:] + [len(self)])]


@dataclass
class RolloutCarry:
    """Environment/policy position carried between successive rollouts."""

    obs: np.ndarray
    state: RecurrentPolicyState
    episode_start: bool = True
    episode_return: float = 0.0


def start_carry(env: TradingEnv, config: PolicyConfig) -> RolloutCarry:
    obs, _ = env.reset()
    return RolloutCarry(obs=obs, state=RecurrentPolicyState.zeros(config))


def collect_rollout(
    env: TradingEnv,
    config: PolicyConfig,
    params: PolicyParams,
    horizon: int,
    rng: np.random.Generator,
    seq_len: int,
    carry: RolloutCarry | None = None,
) -> tuple[RolloutBuffer, RolloutCarry]:
    """Step ``env`` for exactly ``horizon`` sampled actions.

    The recurrent state is zeroed whenever an episode (re)starts. Returns the
    buffer and the carry needed to continue where this rollout stopped.
    """
    if horizon < 1 or seq_len < 1:
        raise ContractError("horizon and seq_len must be >= 1")
    if carry is None:
        carry = start_carry(env, config)
    obs_buf = np.zeros((horizon, config.obs_dim))
    act_buf = np.zeros((horizon, config.n_assets))
    rewards = np.zeros(horizon)
    dones = np.zeros(horizon, dtype=bool)
    values = np.zeros(horizon)
    log_probs = np.zeros(horizon)
    starts = np.zeros(horizon, dtype=bool)
    snapshots: dict[int, RecurrentPolicyState] = {}
    returns: list[float] = []
    obs, state = carry.obs, carry.state
    episode_start, ep_ret = carry.episode_start, carry.episode_return
    since = 0
    for t in range(horizon):
        if t == 0 or episode_start or since == seq_len:
            snapshots[t] = state
            since = 0
        sample = act(params, config, state, obs, rng=rng)
        result = env.step(np.clip(sample.action, -1.0, 1.0))
        obs_buf[t] = obs
        act_buf[t] = sample.action
        rewards[t] = result.reward
        dones[t] = result.done
        values[t] = sample.value
        log_probs[t] = sample.log_prob
        starts[t] = episode_start
        ep_ret += result.reward
        since += 1
        if result.done:
            returns.append(ep_ret)
            obs, _ = env.reset()
            state = RecurrentPolicyState.zeros(config)
            episode_start, ep_ret = True, 0.0
        else:
            obs, state = result.obs, sample.new_state
            episode_start = False
    bootstrap = 0.0 if dones[-1] else act(params, config, state, obs, deterministic=True).value
    buffer = RolloutBuffer(obs_buf, act_buf, rewards, dones, values, log_probs, starts, snapshots, bootstrap, returns)
    return buffer, RolloutCarry(obs, state, episode_start, ep_ret)
