"""Seeded synthetic daily market written in the Yahoo CSV format."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Manifest, OhlcvBar, save_manifest, write_csv


@dataclass(frozen=True)
class SynthConfig:
    """Geometric random walk with a flat lead-in followed by a drift segment.

    ``trend_start`` is the fraction of days after which the daily log drift
    switches from 0 to ``drift``. ``vol = 0`` with ``drift = 0`` produces
    constant prices.
    """

    n_days: int = 1000
    tickers: tuple[str, ...] = ("SYN",)
    start: dt.date = dt.date(2015, 1, 1)
    start_price: float = 50.0
    drift: float = 0.002
    vol: float = 0.01
    trend_start: float = 0.2
    train_fraction: float = 0.75
    seed: int = 0


def business_days(start: dt.date, count: int) -> list[dt.date]:
    days = []
    d = start
    while len(days) < count:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    return days


def generate_bars(config: SynthConfig) -> dict[str, list[OhlcvBar]]:
    rng = np.random.default_rng(config.seed)
    dates = business_days(config.start, config.n_days)
    drift = np.where(np.arange(config.n_days) >= int(config.trend_start * config.n_days), config.drift, 0.0)
    out: dict[str, list[OhlcvBar]] = {}
    for j, ticker in enumerate(config.tickers):
        shocks = rng.standard_normal(config.n_days)
        log_ret = drift + config.vol * shocks
        log_ret[0] = 0.0
        close = config.start_price * (1.0 + 0.25 * j) * np.exp(np.cumsum(log_ret))
        prev = np.concatenate([[close[0]], close[:-1]])
        gap = config.vol * 0.3 * rng.standard_normal(config.n_days)
        opens = prev * np.exp(gap)
        wick = config.vol * 0.5 * np.abs(rng.standard_normal((2, config.n_days)))
        volume = np.round(1e6 * np.exp(0.3 * rng.standard_normal(config.n_days)))
        bars = []
        for i, d in enumerate(dates):
            o, c = round(float(opens[i]), 6), round(float(close[i]), 6)
            hi = max(round(max(o, c) * float(np.exp(wick[0, i])), 6), o, c)
            lo = min(round(min(o, c) * float(np.exp(-wick[1, i])), 6), o, c)
            bars.append(OhlcvBar(d, o, hi, lo, c, c, float(volume[i])))
        out[ticker] = bars
    return out


def write_market(out_dir: str | Path, config: SynthConfig) -> Path:
    """Write one CSV per ticker plus ``manifest.json``; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bars = generate_bars(config)
    files = {}
    for ticker, series in bars.items():
        path = out_dir / f"{ticker}.csv"
        write_csv(path, series)
        files[ticker] = path
    dates = [b.date for b in next(iter(bars.values()))]
    cut = int(config.train_fraction * len(dates))
    manifest = Manifest(
        files=files,
        train_start=dates[0],
        train_end=dates[cut - 1],
        test_start=dates[cut],
        test_end=dates[-1],
    )
    path = out_dir / "manifest.json"
    save_manifest(path, manifest)
    return path
