"""Trading metrics over an equity curve: CR, MER, MPB, APPT and Sharpe."""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ContractError

TRADING_DAYS = 252


@dataclass(frozen=True)
class EquityCurve:
    dates: tuple[dt.date, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or len(values) == 0:
            raise ContractError("equity curve must be a nonempty 1-D series")
        if len(self.dates) != len(values):
            raise ContractError(f"{len(self.dates)} dates for {len(values)} values")
        if not np.all(values > 0):
            raise ContractError("equity values must be positive")
        object.__setattr__(self, "values", values)

    def daily_returns(self) -> np.ndarray:
        return self.values[1:] / self.values[:-1] - 1.0


def _values(curve) -> np.ndarray:
    values = curve.values if isinstance(curve, EquityCurve) else np.asarray(curve, dtype=np.float64)
    if values.ndim != 1 or len(values) == 0:
        raise ContractError("need a nonempty 1-D curve")
    return values


def cumulative_return(curve) -> float:
    v = _values(curve)
    return 100.0 * float((v[-1] - v[0]) / v[0])


def max_earning_rate(curve) -> float:
    v = _values(curve)
    return 100.0 * float(np.max((v - v[0]) / v[0]))


def max_pullback(curve) -> float:
    """Largest peak-to-trough decline in percent, via a running peak."""
    v = _values(curve)
    peak = np.maximum.accumulate(v)
    return 100.0 * max(0.0, float(np.max((peak - v) / peak)))


def max_pullback_bruteforce(curve) -> float:
    """O(n^2) scan over every (earlier, later) pair; reference for :func:`max_pullback`."""
    v = _values(curve)
    best = 0.0
    for i in range(len(v)):
        drops = (v[i] - v[i + 1:]) / v[i]
        if drops.size:
            best = max(best, float(drops.max()))
    return 100.0 * best


def appt(p_init: float, p_final: float, n_trades: int) -> float | None:
    """Average profit per trade; None when there were no trades."""
    if n_trades < 0:
        raise ContractError("n_trades must be >= 0")
    if n_trades == 0:
        return None
    return (p_final - p_init) / n_trades


def sharpe(daily_returns, risk_free_daily: float = 0.0, annualization: float = TRADING_DAYS) -> float | None:
    """sqrt(annualization) * mean excess return / sample std; None if undefined."""
    r = np.asarray(daily_returns, dtype=np.float64)
    if r.size < 2:
        return None
    std = float(np.std(r, ddof=1))
    if std == 0.0:
        return None
    return math.sqrt(annualization) * (float(np.mean(r)) - risk_free_daily) / std


def count_trades(executed: Sequence[np.ndarray]) -> int:
    """Ticker-days with a nonzero executed share count."""
    return int(sum(np.count_nonzero(e) for e in executed))


@dataclass(frozen=True)
class PerformanceReport:
    cr: float
    mer: float
    mpb: float
    appt: float | None
    sharpe: float | None
    n_trades: int

    def to_dict(self) -> dict:
        """Undefined metrics are left out rather than written as zero."""
        out = {"cr": self.cr, "mer": self.mer, "mpb": self.mpb, "appt": self.appt, "sharpe": self.sharpe,
               "n_trades": self.n_trades}
        return {k: v for k, v in out.items() if v is not None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def evaluate(curve: EquityCurve, n_trades: int) -> PerformanceReport:
    v = curve.values
    return PerformanceReport(
        cr=cumulative_return(v),
        mer=max_earning_rate(v),
        mpb=max_pullback(v),
        appt=appt(float(v[0]), float(v[-1]), n_trades),
        sharpe=sharpe(curve.daily_returns()),
        n_trades=n_trades,
    )


def write_equity_csv(path: str | Path, curve: EquityCurve) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "total_value"])
        for d, v in zip(curve.dates, curve.values):
            writer.writerow([d.isoformat(), repr(float(v))])
