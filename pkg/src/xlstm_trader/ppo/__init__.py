"""Recurrent PPO: rollouts with state snapshots, advantages, clipped objective, trainer."""

from .advantages import compute_advantages, normalize
from .buffer import RolloutBuffer, RolloutCarry, collect_rollout, start_carry
from .loss import RatioError, SequenceBatch, clipped_surrogate, ppo_loss
from .trainer import TrainConfig, UpdateStats, make_batches, train

__all__ = [
    "RatioError",
    "RolloutBuffer",
    "RolloutCarry",
    "SequenceBatch",
    "TrainConfig",
    "UpdateStats",
    "clipped_surrogate",
    "collect_rollout",
    "compute_advantages",
    "make_batches",
    "normalize",
    "ppo_loss",
    "start_carry",
    "train",
]
