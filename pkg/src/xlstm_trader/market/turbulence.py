"""Turbulence index: Mahalanobis distance of today's cross-asset returns.

    d_t = (y_t - mu) Sigma^-1 (y_t - mu)^T

with ``mu`` and ``Sigma`` estimated from a trailing window of returns that
strictly precede day t.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from .data import AlignedPanel

DEFAULT_HISTORY = 252
DEFAULT_QUANTILE = 0.99
RIDGE = 1e-8


@dataclass(frozen=True, eq=False)
class TurbulenceSeries:
    values: np.ndarray  # one nonnegative value per panel date
    threshold: float

    def is_turbulent(self, day: int) -> bool:
        return bool(self.values[day] > self.threshold)


def turbulence(returns_history: np.ndarray, y_t: np.ndarray) -> float:
    """Mahalanobis distance of ``y_t`` from a (W_hist, N) return history.

    The sample covariance is ridge-regularised by 1e-8 * I before solving.
    """
    hist = np.asarray(returns_history, dtype=np.float64)
    y = np.asarray(y_t, dtype=np.float64).reshape(-1)
    if hist.ndim != 2 or hist.shape[1] != y.size:
        raise ContractError(f"history shape {hist.shape} does not match return vector of length {y.size}")
    n = y.size
    if hist.shape[0] < n + 2:
        raise ContractError(f"need at least {n + 2} history rows for {n} assets, got {hist.shape[0]}")
    mu = hist.mean(axis=0)
    cov = np.atleast_2d(np.cov(hist, rowvar=False)) + RIDGE * np.eye(n)
    dev = y - mu
    value = float(dev @ np.linalg.solve(cov, dev))
    return max(value, 0.0)


def daily_returns(panel: AlignedPanel) -> np.ndarray:
    """Simple adj-close returns, shape (dates, tickers); row 0 is zero."""
    adj = panel.adj_close
    out = np.zeros_like(adj)
    out[1:] = adj[1:] / adj[:-1] - 1.0
    return out


def turbulence_series(
    panel: AlignedPanel,
    train_start: dt.date | None,
    train_end: dt.date | None,
    history: int = DEFAULT_HISTORY,
    quantile: float = DEFAULT_QUANTILE,
    threshold: float | None = None,
) -> TurbulenceSeries:
    """Turbulence for every panel date and the gating threshold.

    A date gets a value only once ``history`` earlier returns exist; before
    that it is 0. Unless given explicitly, the threshold is the ``quantile``
    of the defined values inside the training split (inf if there are none).
    """
    n_assets = panel.n_tickers
    if history < n_assets + 2:
        raise ContractError(f"history {history} too short for {n_assets} assets")
    rets = daily_returns(panel)
    values = np.zeros(panel.n_dates)
    defined = np.zeros(panel.n_dates, dtype=bool)
    for t in range(history + 1, panel.n_dates):
        values[t] = turbulence(rets[t - history : t], rets[t])
        defined[t] = True
    if threshold is None:
        lo, hi = panel.index_range(train_start, train_end)
        sample = values[lo : hi + 1][defined[lo : hi + 1]]
        threshold = float(np.quantile(sample, quantile)) if sample.size else float("inf")
    return TurbulenceSeries(values=values, threshold=float(threshold))
