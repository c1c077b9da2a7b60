"""Stock-trading MDP: portfolio accounting, costed execution, turbulence gate.

Step reward, given the day's turbulence ``d``:

    d > threshold        -> -1 (and, by default, the action is replaced by hold)
    otherwise            -> clamp(((V' - V) - cost) * reward_scale, -1, 1)

where ``V`` / ``V'`` are total asset values before and after the step.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ContractError
from .market import AlignedPanel, TurbulenceSeries, build_observation, observation_size

PENALTY_VALUE = -1.0


@dataclass(frozen=True)
class EnvConfig:
    initial_balance: float = 1_000_000.0
    h_max: int = 100
    cost_rate: float = 0.001
    turbulence_threshold: float | None = None
    reward_scale: float = 1e-4
    window: int = 30
    block_turbulent_trades: bool = True

    def __post_init__(self):
        if not self.initial_balance > 0:
            raise ContractError("initial_balance must be positive")
        if self.h_max < 1:
            raise ContractError("h_max must be >= 1")
        if not 0 <= self.cost_rate < 1:
            raise ContractError("cost_rate must lie in [0, 1)")
        if self.window < 1:
            raise ContractError("window must be >= 1")

    @property
    def penalty_value(self) -> float:
        return PENALTY_VALUE


@dataclass
class PortfolioState:
    balance: float
    shares: np.ndarray
    day: int
    prev_total_value: float

    def total_value(self, prices: np.ndarray) -> float:
        return float(self.balance + np.dot(self.shares.astype(np.float64), prices))

    def copy(self) -> "PortfolioState":
        return replace(self, shares=self.shares.copy())


@dataclass
class StepInfo:
    date: dt.date
    trades: dict[str, int]
    executed: np.ndarray
    cost: float
    turbulence: float
    turbulent: bool
    total_value: float
    balance: float


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    done: bool
    info: StepInfo


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


def execute_trades(
    state: PortfolioState,
    action: Sequence[float],
    prices: np.ndarray,
    config: EnvConfig,
) -> tuple[PortfolioState, float, np.ndarray]:
    """Turn an action in [-1, 1]^N into executed integer share trades.

    Sells run first (capped at holdings), then buys in ticker order, each
    capped by the cash left including its fee. Returns the new state, the
    total fee and the signed executed shares.
    """
    prices = np.asarray(prices, dtype=np.float64)
    if np.any(prices <= 0):
        raise ContractError("prices must be positive")
    desired = _round_half_away(np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0) * config.h_max)
    new = state.copy()
    executed = np.zeros_like(desired)
    cost = 0.0
    for i in np.flatnonzero(desired < 0):
        qty = int(min(-desired[i], new.shares[i]))
        if qty == 0:
            continue
        notional = qty * prices[i]
        fee = config.cost_rate * notional
        new.balance += notional - fee
        new.shares[i] -= qty
        executed[i] = -qty
        cost += fee
    for i in np.flatnonzero(desired > 0):
        unit = prices[i] * (1.0 + config.cost_rate)
        qty = int(min(desired[i], math.floor(new.balance / unit)))
        while qty > 0 and qty * prices[i] + config.cost_rate * (qty * prices[i]) > new.balance:
            qty -= 1
        if qty <= 0:
            continue
        notional = qty * prices[i]
        fee = config.cost_rate * notional
        new.balance -= notional + fee
        new.shares[i] += qty
        executed[i] = qty
        cost += fee
    return new, cost, executed


def compute_reward(
    turbulence: float,
    config: EnvConfig,
    prev_total_value: float,
    total_value: float,
    cost: float,
) -> float:
    threshold = config.turbulence_threshold
    if threshold is not None and turbulence > threshold:
        return PENALTY_VALUE
    raw = (total_value - prev_total_value) - cost
    return float(min(1.0, max(-1.0, raw * config.reward_scale)))


class TradingEnv:
    """One episode runs from ``max(start, window)`` to ``end`` (inclusive indices).

    If ``config.turbulence_threshold`` is None, the series threshold is used.
    """

    def __init__(
        self,
        panel: AlignedPanel,
        turbulence: TurbulenceSeries,
        config: EnvConfig,
        start: int,
        end: int,
    ):
        if config.turbulence_threshold is None:
            config = replace(config, turbulence_threshold=turbulence.threshold)
        if not 0 <= start <= end < panel.n_dates:
            raise ContractError(f"split [{start}, {end}] outside panel of {panel.n_dates} dates")
        if end - start + 1 < config.window + 2:
            raise ContractError(f"split has {end - start + 1} days; needs at least window + 2 = {config.window + 2}")
        self.panel = panel
        self.turbulence = turbulence
        self.config = config
        self.start = start
        self.end = end
        self.first_day = max(start, config.window)
        if self.end - self.first_day < 1:
            raise ContractError("split leaves no tradable steps after the observation window")
        self._state: PortfolioState | None = None

    @classmethod
    def for_dates(
        cls,
        panel: AlignedPanel,
        turbulence: TurbulenceSeries,
        config: EnvConfig,
        start: dt.date | None,
        end: dt.date | None,
    ) -> "TradingEnv":
        lo, hi = panel.index_range(start, end)
        return cls(panel, turbulence, config, lo, hi)

    @property
    def n_assets(self) -> int:
        return self.panel.n_tickers

    @property
    def obs_dim(self) -> int:
        return observation_size(self.config.window, self.panel.n_tickers)

    @property
    def episode_length(self) -> int:
        return self.end - self.first_day

    @property
    def state(self) -> PortfolioState:
        if self._state is None:
            raise ContractError("environment not reset")
        return self._state

    def observe(self, state: PortfolioState) -> np.ndarray:
        return build_observation(
            self.panel, state.day, self.config.window, state.balance, state.shares, self.config.initial_balance
        )

    def reset(self) -> tuple[np.ndarray, PortfolioState]:
        bal = float(self.config.initial_balance)
        self._state = PortfolioState(
            balance=bal,
            shares=np.zeros(self.n_assets, dtype=np.int64),
            day=self.first_day,
            prev_total_value=bal,
        )
        return self.observe(self._state), self._state.copy()

    def step(self, action: Sequence[float]) -> StepResult:
        state = self.state
        t = state.day
        if t >= self.end:
            raise ContractError("step called on a finished episode")
        prices = self.panel.adj_close[t]
        turb = float(self.turbulence.values[t])
        turbulent = turb > self.config.turbulence_threshold
        if turbulent and self.config.block_turbulent_trades:
            new, cost, executed = state.copy(), 0.0, np.zeros(self.n_assets, dtype=np.int64)
        else:
            new, cost, executed = execute_trades(state, action, prices, self.config)
        new.day = t + 1
        total = new.total_value(self.panel.adj_close[t + 1])
        reward = compute_reward(turb, self.config, state.prev_total_value, total, cost)
        new.prev_total_value = total
        self._state = new
        info = StepInfo(
            date=self.panel.dates[t],
            trades={self.panel.tickers[i]: int(executed[i]) for i in np.flatnonzero(executed)},
            executed=executed,
            cost=cost,
            turbulence=turb,
            turbulent=bool(turbulent),
            total_value=total,
            balance=new.balance,
        )
        return StepResult(obs=self.observe(new), reward=reward, done=new.day == self.end, info=info)


def write_trace(path: str | Path, tickers: Sequence[str], infos: Sequence[StepInfo], rewards: Sequence[float]) -> None:
    """Episode trace CSV: trade date, executed shares per ticker, cost, balance, value, turbulence, reward."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", *[f"shares_{t}" for t in tickers], "cost", "balance", "total_value", "turbulence", "reward"])
        for info, r in zip(infos, rewards):
            writer.writerow(
                [info.date.isoformat(), *[int(x) for x in info.executed], repr(info.cost), repr(info.balance),
                 repr(info.total_value), repr(info.turbulence), repr(float(r))]
            )
