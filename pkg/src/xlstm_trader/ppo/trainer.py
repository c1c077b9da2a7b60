"""Recurrent PPO training loop."""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..env import TradingEnv
from ..errors import ContractError, NonFiniteError, TrainingError
from ..numerics import AdamState, adam_step, backward, clip_grad_norm, zero_grad
from ..params import parameters
from ..policy import PolicyConfig, PolicyParams, concat_states, init_policy
from .advantages import compute_advantages, normalize
from .buffer import RolloutBuffer, RolloutCarry, collect_rollout
from .loss import RatioError, SequenceBatch, ppo_loss

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.0
    clip_range: float = 0.2
    learning_rate: float = 3e-4
    batch_size: int = 32
    seq_len: int | None = None
    epochs: int = 10
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    max_grad_norm: float = 0.5
    total_timesteps: int = 0
    horizon: int | None = None
    normalize_advantages: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ContractError("gamma must lie in (0, 1]")
        if not 0 <= self.gae_lambda <= 1:
            raise ContractError("gae_lambda must lie in [0, 1]")
        if not self.clip_range > 0:
            raise ContractError("clip_range must be positive")
        if self.learning_rate < 0:
            raise ContractError("learning_rate must be >= 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ContractError("batch_size and epochs must be >= 1")
        if self.seq_len is not None and self.seq_len < 1:
            raise ContractError("seq_len must be >= 1")
        if self.horizon is not None and self.horizon < 1:
            raise ContractError("horizon must be >= 1")
        if self.total_timesteps < 0:
            raise ContractError("total_timesteps must be >= 0")
        if not self.max_grad_norm > 0:
            raise ContractError("max_grad_norm must be positive")

    def resolved(self, window: int, episode_length: int) -> "TrainConfig":
        """Fill ``seq_len`` and ``horizon`` from the environment."""
        return dataclasses.replace(
            self,
            seq_len=self.seq_len if self.seq_len is not None else window,
            horizon=self.horizon if self.horizon is not None else episode_length,
        )


@dataclass
class UpdateStats:
    update: int
    timesteps: int
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float
    mean_episode_return: float | None
    grad_norm: float
    skipped_minibatches: int

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)


def make_batches(
    buffer: RolloutBuffer,
    advantages: np.ndarray,
    returns: np.ndarray,
    seq_len: int,
    batch_size: int,
    rng: np.random.Generator,
) -> list[SequenceBatch]:
    """Shuffle subsequences and pad them into minibatches.

    ``batch_size`` counts timesteps, so each minibatch carries
    ``max(1, batch_size // seq_len)`` subsequences.
    """
    segments = buffer.segments()
    per_batch = max(1, batch_size // seq_len)
    order = rng.permutation(len(segments))
    out = []
    for lo in range(0, len(order), per_batch):
        chosen = [segments[i] for i in order[lo:lo + per_batch]]
        B, L = len(chosen), max(e - s for s, e in chosen)
        obs = np.zeros((B, L, buffer.obs.shape[1]))
        actions = np.zeros((B, L, buffer.actions.shape[1]))
        old_lp, adv, ret, mask = (np.zeros((B, L)) for _ in range(4))
        for b, (s, e) in enumerate(chosen):
            n = e - s
            obs[b, :n] = buffer.obs[s:e]
            actions[b, :n] = buffer.actions[s:e]
            old_lp[b, :n] = buffer.log_probs[s:e]
            adv[b, :n] = advantages[s:e]
            ret[b, :n] = returns[s:e]
            mask[b, :n] = 1.0
        init = concat_states([buffer.snapshots[s] for s, _ in chosen])
        out.append(SequenceBatch(obs, actions, old_lp, adv, ret, mask, init))
    return out


def _mean(xs) -> float:
    return float(np.mean(xs)) if len(xs) else 0.0


def train(
    config: TrainConfig,
    env: TradingEnv,
    policy_config: PolicyConfig,
    params: PolicyParams | None = None,
    on_update: Callable[[UpdateStats], None] | None = None,
) -> tuple[PolicyParams, list[UpdateStats]]:
    """Collect, estimate advantages, then run epochs of minibatch Adam steps.

    Each update draws a fresh rollout of ``horizon`` steps; the buffer is
    discarded afterwards. A fixed ``seed`` gives a bit-identical history.
    """
    if policy_config.obs_dim != env.obs_dim or policy_config.n_assets != env.n_assets:
        raise ContractError(
            f"policy expects obs {policy_config.obs_dim} / assets {policy_config.n_assets}, "
            f"env gives {env.obs_dim} / {env.n_assets}"
        )
    config = config.resolved(env.config.window, env.episode_length)
    init_seq, rollout_seq, shuffle_seq = np.random.SeedSequence(config.seed).spawn(3)
    if params is None:
        params = init_policy(policy_config, np.random.default_rng(init_seq))
    rollout_rng = np.random.default_rng(rollout_seq)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    plist = parameters(params)
    adam = AdamState.for_params(plist, alpha=config.learning_rate)
    history: list[UpdateStats] = []
    carry: RolloutCarry | None = None
    done_steps = 0
    while done_steps < config.total_timesteps:
        horizon = min(config.horizon, config.total_timesteps - done_steps)
        buffer, carry = collect_rollout(env, policy_config, params, horizon, rollout_rng, config.seq_len, carry)
        done_steps += horizon
        adv, ret = compute_advantages(
            buffer.rewards, buffer.values, buffer.dones, buffer.bootstrap_value, config.gamma, config.gae_lambda
        )
        if config.normalize_advantages:
            adv = normalize(adv)
        stats: dict[str, list[float]] = {"policy_loss": [], "value_loss": [], "entropy": [], "clip_fraction": []}
        norms: list[float] = []
        skipped = 0
        for _ in range(config.epochs):
            for batch in make_batches(buffer, adv, ret, config.seq_len, config.batch_size, shuffle_rng):
                zero_grad(plist)
                try:
                    loss, mb = ppo_loss(
                        batch, policy_config, params, config.clip_range, config.value_coef, config.entropy_coef
                    )
                except RatioError as exc:
                    log.warning("skipping minibatch: %s", exc)
                    skipped += 1
                    continue
                except NonFiniteError as exc:
                    raise TrainingError(f"non-finite loss at update {len(history)}: {exc}", dump=batch.dump()) from exc
                backward(loss, plist)
                norms.append(clip_grad_norm(plist, config.max_grad_norm))
                adam_step(plist, adam)
                for k, v in mb.items():
                    stats[k].append(v)
        update = UpdateStats(
            update=len(history),
            timesteps=done_steps,
            policy_loss=_mean(stats["policy_loss"]),
            value_loss=_mean(stats["value_loss"]),
            entropy=_mean(stats["entropy"]),
            clip_fraction=_mean(stats["clip_fraction"]),
            mean_episode_return=_mean(buffer.episode_returns) if buffer.episode_returns else None,
            grad_norm=_mean(norms),
            skipped_minibatches=skipped,
        )
        history.append(update)
        if on_update is not None:
            on_update(update)
    return params, history
