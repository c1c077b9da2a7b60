"""Observation vectors fed to the policy."""

from __future__ import annotations

import numpy as np

from ..errors import ContractError
from .data import FEATURES, AlignedPanel


def observation_size(window: int, n_tickers: int) -> int:
    return window * n_tickers * len(FEATURES) + 1 + n_tickers


def build_observation(
    panel: AlignedPanel,
    t: int,
    window: int,
    balance: float,
    shares: np.ndarray,
    initial_balance: float,
) -> np.ndarray:
    """Concatenate the z-scored feature window with the portfolio block.

    Layout: features of days ``t-window+1 .. t`` (date-major, then ticker,
    then feature), ``balance / initial_balance``, then each ticker's
    holding value at day-t adj close divided by ``initial_balance``.
    """
    if window < 1:
        raise ContractError(f"window must be >= 1, got {window}")
    if t < window or t >= panel.n_dates:
        raise ContractError(f"day index {t} outside [{window}, {panel.n_dates - 1}]")
    feats = panel.normalized[t - window + 1 : t + 1].reshape(-1)
    holdings = np.asarray(shares, dtype=np.float64) * panel.adj_close[t] / initial_balance
    return np.concatenate([feats, [balance / initial_balance], holdings])
