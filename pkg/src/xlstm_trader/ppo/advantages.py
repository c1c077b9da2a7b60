"""One-step / GAE advantage estimation."""

from __future__ import annotations

import numpy as np

from ..errors import ContractError


def compute_advantages(
    rewards,
    values,
    dones,
    bootstrap_value: float,
    gamma: float = 0.99,
    gae_lambda: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """GAE over one rollout; returns (advantages, returns).

    ``dones[t]`` marks that the episode ended after step t, which masks both
    the bootstrap and the recursion. ``bootstrap_value`` is the critic's
    estimate for the observation following the last step. With
    ``gae_lambda = 0`` the advantage is exactly ``r + gamma * v_next - v``.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    n = len(rewards)
    if values.shape != (n,) or dones.shape != (n,) or rewards.ndim != 1:
        raise ContractError(f"length mismatch: rewards {rewards.shape}, values {values.shape}, dones {dones.shape}")
    if not 0 < gamma <= 1 or not 0 <= gae_lambda <= 1:
        raise ContractError("need 0 < gamma <= 1 and 0 <= gae_lambda <= 1")
    adv = np.zeros(n)
    next_adv = 0.0
    next_value = float(bootstrap_value)
    for t in range(n - 1, -1, -1):
        if dones[t]:
            delta = rewards[t] - values[t]
            next_adv = delta
        else:
            delta = (rewards[t] + gamma * next_value) - values[t]
            next_adv = delta + gamma * gae_lambda * next_adv if gae_lambda > 0 else delta
        adv[t] = next_adv
        next_value = values[t]
    return adv, adv + values


def normalize(adv: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Zero mean and unit std; only centred when the std is below ``eps``."""
    centred = adv - adv.mean()
    std = adv.std()
    return centred / std if std >= eps else centred
