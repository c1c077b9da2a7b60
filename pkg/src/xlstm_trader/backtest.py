"""Run a policy (or a fixed rule) through one full episode and score it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .env import StepInfo, TradingEnv
from .metrics import EquityCurve, PerformanceReport, count_trades, evaluate
from .policy import PolicyConfig, PolicyParams, RecurrentPolicyState, act


@dataclass
class BacktestResult:
    curve: EquityCurve
    report: PerformanceReport
    infos: list[StepInfo]
    rewards: list[float]


def run_episode(env: TradingEnv, choose: Callable[[np.ndarray], np.ndarray]) -> BacktestResult:
    """``choose(obs) -> action``; the curve starts at the initial balance."""
    obs, state = env.reset()
    dates = [env.panel.dates[state.day]]
    values = [env.config.initial_balance]
    infos, rewards = [], []
    done = False
    while not done:
        result = env.step(choose(obs))
        infos.append(result.info)
        rewards.append(result.reward)
        dates.append(env.panel.dates[env.state.day])
        values.append(result.info.total_value)
        obs, done = result.obs, result.done
    curve = EquityCurve(tuple(dates), np.array(values))
    return BacktestResult(curve, evaluate(curve, count_trades([i.executed for i in infos])), infos, rewards)


def backtest_policy(env: TradingEnv, config: PolicyConfig, params: PolicyParams) -> BacktestResult:
    """Deterministic rollout using the Gaussian mean as the action."""
    holder = {"state": RecurrentPolicyState.zeros(config)}

    def choose(obs):
        sample = act(params, config, holder["state"], obs, deterministic=True)
        holder["state"] = sample.new_state
        return np.clip(sample.action, -1.0, 1.0)

    return run_episode(env, choose)


def backtest_zero(env: TradingEnv) -> BacktestResult:
    return run_episode(env, lambda obs: np.zeros(env.n_assets))


def backtest_random(env: TradingEnv, seed: int = 0) -> BacktestResult:
    rng = np.random.default_rng(seed)
    return run_episode(env, lambda obs: rng.uniform(-1.0, 1.0, env.n_assets))
