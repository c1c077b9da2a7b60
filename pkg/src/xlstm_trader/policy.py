"""Recurrent actor-critic policy with independent actor and critic towers.

Each tower is ``obs -> MLP(GeLU) -> block stack -> linear head``. The actor
head gives the mean of a diagonal Gaussian whose log standard deviation is a
free, state-independent parameter vector.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractError, DimensionError
from .numerics import Tensor, add, concat, div, exp, gelu, linear, mul, neg, no_grad, square, stack, sub, tsum
from .xlstm import BlockParams, BlockStackConfig, init_stack, stack_step, zero_states
from .xlstm.cells import _uniform

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
HALF_LOG_2PIE = 0.5 * math.log(2.0 * math.pi * math.e)

MODEL_LAYERS = {
    "xlstm": ("mlstm", "slstm"),
    "lstm": ("lstm", "lstm"),
}


@dataclass(frozen=True)
class PolicyConfig:
    obs_dim: int
    n_assets: int
    stack: BlockStackConfig = BlockStackConfig()
    actor_head_scale: float = 0.01

    @classmethod
    def for_model(cls, model: str, obs_dim: int, n_assets: int, embedding_dim: int = 128, **stack_kw) -> "PolicyConfig":
        if model not in MODEL_LAYERS:
            raise ContractError(f"unknown model kind {model!r}; choose from {sorted(MODEL_LAYERS)}")
        return cls(obs_dim, n_assets, BlockStackConfig(embedding_dim=embedding_dim, layers=MODEL_LAYERS[model], **stack_kw))

    @property
    def embedding_dim(self) -> int:
        return self.stack.embedding_dim


@dataclass
class Tower:
    feat_W1: Tensor
    feat_b1: Tensor
    feat_W2: Tensor
    feat_b2: Tensor
    blocks: list[BlockParams]
    head_W: Tensor
    head_b: Tensor


@dataclass
class PolicyParams:
    actor: Tower
    log_std: Tensor
    critic: Tower


@dataclass
class RecurrentPolicyState:
    actor_states: list
    critic_states: list

    @classmethod
    def zeros(cls, config: PolicyConfig, batch: int = 1) -> "RecurrentPolicyState":
        return cls(zero_states(config.stack, batch), zero_states(config.stack, batch))

    def detach(self) -> "RecurrentPolicyState":
        """Copy with plain (non-graph) tensors; safe to store in a buffer."""
        return _map_state(self, lambda t: Tensor(t.data))

    @property
    def batch_size(self) -> int:
        first = dataclasses.fields(self.actor_states[0])[0].name
        return getattr(self.actor_states[0], first).shape[0]


def _map_state(state: RecurrentPolicyState, fn) -> RecurrentPolicyState:
    def per_layer(layer):
        return type(layer)(**{f.name: fn(getattr(layer, f.name)) for f in dataclasses.fields(layer)})

    return RecurrentPolicyState([per_layer(s) for s in state.actor_states], [per_layer(s) for s in state.critic_states])


def concat_states(states: Sequence[RecurrentPolicyState]) -> RecurrentPolicyState:
    """Stack single snapshots along the batch axis."""
    first = states[0]

    def merge(layers):
        kind = type(layers[0])
        return kind(**{f.name: Tensor(np.concatenate([getattr(s, f.name).data for s in layers], axis=0))
                       for f in dataclasses.fields(kind)})

    actor = [merge([s.actor_states[i] for s in states]) for i in range(len(first.actor_states))]
    critic = [merge([s.critic_states[i] for s in states]) for i in range(len(first.critic_states))]
    return RecurrentPolicyState(actor, critic)


@dataclass
class ActionSample:
    action: np.ndarray
    log_prob: float
    value: float
    new_state: RecurrentPolicyState
    mean: np.ndarray


def _init_tower(config: PolicyConfig, out_dim: int, head_scale: float, rng: np.random.Generator) -> Tower:
    d = config.embedding_dim
    head = _uniform(rng, (out_dim, d), d)
    head.data = head.data * head_scale
    return Tower(
        feat_W1=_uniform(rng, (d, config.obs_dim), config.obs_dim),
        feat_b1=Tensor(np.zeros(d), requires_grad=True),
        feat_W2=_uniform(rng, (d, d), d),
        feat_b2=Tensor(np.zeros(d), requires_grad=True),
        blocks=init_stack(config.stack, rng),
        head_W=head,
        head_b=Tensor(np.zeros(out_dim), requires_grad=True),
    )


def init_policy(config: PolicyConfig, rng: np.random.Generator) -> PolicyParams:
    actor = _init_tower(config, config.n_assets, config.actor_head_scale, rng)
    critic = _init_tower(config, 1, 1.0, rng)
    return PolicyParams(actor=actor, log_std=Tensor(np.zeros(config.n_assets), requires_grad=True), critic=critic)


def _tower_step(tower: Tower, stack_cfg: BlockStackConfig, states, obs: Tensor):
    feats = linear(gelu(linear(obs, tower.feat_W1, tower.feat_b1)), tower.feat_W2, tower.feat_b2)
    y, new_states = stack_step(stack_cfg, tower.blocks, states, feats)
    return linear(y, tower.head_W, tower.head_b), new_states


def policy_step(
    params: PolicyParams,
    config: PolicyConfig,
    state: RecurrentPolicyState,
    obs: Tensor,
) -> tuple[Tensor, Tensor, RecurrentPolicyState]:
    """One batched step of both towers: (mean (B, N), value (B,), new state)."""
    if obs.ndim != 2 or obs.shape[1] != config.obs_dim:
        raise DimensionError(f"observation must be (B, {config.obs_dim}), got {obs.shape}")
    if len(state.actor_states) != len(config.stack.layers) or len(state.critic_states) != len(config.stack.layers):
        raise ContractError("recurrent state layer count does not match the policy")
    mean, actor_states = _tower_step(params.actor, config.stack, state.actor_states, obs)
    value, critic_states = _tower_step(params.critic, config.stack, state.critic_states, obs)
    value = value.reshape(obs.shape[0])
    return mean, value, RecurrentPolicyState(actor_states, critic_states)


def gaussian_log_prob_tensor(mean: Tensor, log_std: Tensor, action) -> Tensor:
    """Differentiable diagonal-Gaussian log density, summed over the last axis."""
    z = div(sub(action, mean), exp(log_std))
    terms = sub(sub(neg(log_std), HALF_LOG_2PI), mul(0.5, square(z)))
    return tsum(terms, axis=-1)


def gaussian_log_prob(mean, log_std, a) -> float:
    """sum_i [ -log_std_i - log(2 pi)/2 - ((a_i - mean_i) / exp(log_std_i))^2 / 2 ]."""
    mean = np.asarray(mean, dtype=np.float64)
    log_std = np.asarray(log_std, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    z = (a - mean) / np.exp(log_std)
    return float(np.sum((-log_std - HALF_LOG_2PI) - 0.5 * (z * z), axis=-1))


def gaussian_entropy(log_std: Tensor) -> Tensor:
    return tsum(add(log_std, HALF_LOG_2PIE))


def act(
    params: PolicyParams,
    config: PolicyConfig,
    state: RecurrentPolicyState,
    obs: np.ndarray,
    rng: np.random.Generator | None = None,
    deterministic: bool = False,
) -> ActionSample:
    """Sample (or take the mean) action for one observation."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != (config.obs_dim,):
        raise DimensionError(f"observation must have {config.obs_dim} entries, got shape {obs.shape}")
    with no_grad():
        mean, value, new_state = policy_step(params, config, state, Tensor(obs[None, :]))
        if deterministic:
            action = mean.data[0].copy()
        else:
            if rng is None:
                raise ContractError("stochastic act needs an rng")
            action = mean.data[0] + np.exp(params.log_std.data) * rng.standard_normal(config.n_assets)
        log_prob = gaussian_log_prob_tensor(mean, params.log_std, Tensor(action[None, :]))
    return ActionSample(
        action=action,
        log_prob=float(log_prob.data[0]),
        value=float(value.data[0]),
        new_state=new_state.detach(),
        mean=mean.data[0].copy(),
    )


def evaluate_sequence(
    params: PolicyParams,
    config: PolicyConfig,
    init_state: RecurrentPolicyState,
    obs_seq: np.ndarray,
    actions: np.ndarray,
) -> tuple[Tensor, Tensor, Tensor]:
    """Replay one sequence step by step: (log_probs (T,), values (T,), entropy).

    Uses the same single-row computation as :func:`act`, so replaying a
    rollout with unchanged parameters reproduces its log-probs exactly.
    """
    obs_seq = np.asarray(obs_seq, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    if obs_seq.ndim != 2 or actions.ndim != 2 or len(obs_seq) != len(actions) or len(obs_seq) == 0:
        raise ContractError(f"need matching nonempty sequences, got {obs_seq.shape} and {actions.shape}")
    state = init_state
    log_probs, values = [], []
    for obs, a in zip(obs_seq, actions):
        mean, value, state = policy_step(params, config, state, Tensor(obs[None, :]))
        log_probs.append(gaussian_log_prob_tensor(mean, params.log_std, Tensor(a[None, :])))
        values.append(value)
    return concat(log_probs), concat(values), gaussian_entropy(params.log_std)


def evaluate_batch(
    params: PolicyParams,
    config: PolicyConfig,
    init_state: RecurrentPolicyState,
    obs: np.ndarray,
    actions: np.ndarray,
) -> tuple[Tensor, Tensor, Tensor]:
    """Replay B padded sequences at once: log_probs and values of shape (B, L)."""
    B, L = obs.shape[:2]
    if actions.shape[:2] != (B, L):
        raise ContractError(f"actions {actions.shape} do not match observations {obs.shape}")
    state = init_state
    log_probs, values = [], []
    for t in range(L):
        mean, value, state = policy_step(params, config, state, Tensor(obs[:, t]))
        log_probs.append(gaussian_log_prob_tensor(mean, params.log_std, Tensor(actions[:, t])))
        values.append(value)
    return stack(log_probs, axis=1), stack(values, axis=1), gaussian_entropy(params.log_std)
