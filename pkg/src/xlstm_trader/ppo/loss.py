"""Clipped-surrogate PPO objective over padded recurrent minibatches."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TrainingError
from ..numerics import Tensor, add, clamp, exp, minimum, mul, square, sub, tsum
from ..policy import PolicyConfig, PolicyParams, RecurrentPolicyState, evaluate_batch

MAX_LOG_RATIO = 700.0


@dataclass
class SequenceBatch:
    """B padded subsequences of length L; ``mask`` is 1 on real steps."""

    obs: np.ndarray
    actions: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    mask: np.ndarray
    init_state: RecurrentPolicyState

    def dump(self) -> dict:
        return {
            "obs": self.obs.tolist(),
            "actions": self.actions.tolist(),
            "old_log_probs": self.old_log_probs.tolist(),
            "advantages": self.advantages.tolist(),
            "returns": self.returns.tolist(),
            "mask": self.mask.tolist(),
        }


class RatioError(TrainingError):
    """Importance ratio would overflow; the minibatch should be skipped."""


def clipped_surrogate(ratio: Tensor, advantages, clip_range: float) -> Tensor:
    """Elementwise min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)."""
    clipped = clamp(ratio, 1.0 - clip_range, 1.0 + clip_range)
    return minimum(mul(ratio, advantages), mul(clipped, advantages))


def _masked_mean(x: Tensor, mask: np.ndarray, count: float) -> Tensor:
    return mul(tsum(mul(x, mask)), 1.0 / count)


def ppo_loss(
    batch: SequenceBatch,
    config: PolicyConfig,
    params: PolicyParams,
    clip_range: float = 0.2,
    value_coef: float = 0.5,
    entropy_coef: float = 0.01,
) -> tuple[Tensor, dict[str, float]]:
    """loss = -surrogate + value_coef * value MSE - entropy_coef * entropy.

    Raises :class:`RatioError` when a log-ratio is too large to exponentiate.
    """
    log_probs, values, entropy = evaluate_batch(params, config, batch.init_state, batch.obs, batch.actions)
    mask = batch.mask.astype(np.float64)
    count = float(mask.sum())
    log_ratio = sub(log_probs, batch.old_log_probs)
    live = log_ratio.data[mask > 0]
    if live.size and np.max(live) > MAX_LOG_RATIO:
        raise RatioError(f"log importance ratio {np.max(live):.3g} is not finite after exp", dump=batch.dump())
    # padded slots can hold anything; zero them before exponentiating
    ratio = exp(mul(log_ratio, mask))
    policy_loss = mul(_masked_mean(clipped_surrogate(ratio, batch.advantages, clip_range), mask, count), -1.0)
    value_loss = _masked_mean(square(sub(values, batch.returns)), mask, count)
    loss = sub(add(policy_loss, mul(value_loss, value_coef)), mul(entropy, entropy_coef))
    rho = ratio.data[mask > 0]
    stats = {
        "policy_loss": float(policy_loss.data),
        "value_loss": float(value_loss.data),
        "entropy": float(entropy.data),
        "clip_fraction": float(np.mean(np.abs(rho - 1.0) > clip_range)) if rho.size else 0.0,
    }
    return loss, stats
