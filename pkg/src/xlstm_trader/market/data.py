"""OHLCV ingestion, multi-ticker date alignment and feature normalisation."""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..errors import ContractError, DataError, ParseError

CSV_HEADER = ("Date", "Open", "High", "Low", "Close", "Adj Close", "Volume")
FEATURES = ("open", "high", "low", "close", "adj_close", "volume")
ADJ_CLOSE = FEATURES.index("adj_close")
VOLUME = FEATURES.index("volume")


@dataclass(frozen=True)
class OhlcvBar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    adj_close: float
    volume: float

    def validate(self) -> None:
        prices = (self.open, self.high, self.low, self.close, self.adj_close)
        if not all(math.isfinite(p) and p > 0 for p in prices):
            raise DataError(f"{self.date}: prices must be positive and finite")
        if not (math.isfinite(self.volume) and self.volume >= 0):
            raise DataError(f"{self.date}: volume must be a nonnegative number")
        if self.low > min(self.open, self.close) or self.high < max(self.open, self.close):
            raise DataError(f"{self.date}: bar violates low <= open/close <= high")
        if self.high < self.low:
            raise DataError(f"{self.date}: high {self.high} below low {self.low}")

    def as_row(self) -> tuple[float, ...]:
        return (self.open, self.high, self.low, self.close, self.adj_close, self.volume)


def parse_date(text: str) -> dt.date:
    return dt.datetime.strptime(text.strip(), "%Y-%m-%d").date()


def load_csv(path: str | Path) -> list[OhlcvBar]:
    """Read a Yahoo-style daily CSV into validated bars.

    Raises ParseError (with the 1-based line number) for malformed rows and
    DataError for invariant violations or dates that are not strictly
    increasing.
    """
    bars: list[OhlcvBar] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise ParseError(f"{path}: expected header {','.join(CSV_HEADER)}", line=1)
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(CSV_HEADER):
                raise ParseError(f"{path}: expected {len(CSV_HEADER)} fields, got {len(row)}", line=line)
            try:
                date = parse_date(row[0])
                values = [float(cell) for cell in row[1:]]
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", line=line) from None
            bar = OhlcvBar(date, *values)
            try:
                bar.validate()
            except DataError as exc:
                raise DataError(f"{path} line {line}: {exc}") from None
            if bars and date <= bars[-1].date:
                raise DataError(f"{path} line {line}: date {date} not after {bars[-1].date}")
            bars.append(bar)
    return bars


def write_csv(path: str | Path, bars: Sequence[OhlcvBar]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for b in bars:
            writer.writerow(
                [b.date.isoformat(), f"{b.open:.6f}", f"{b.high:.6f}", f"{b.low:.6f}",
                 f"{b.close:.6f}", f"{b.adj_close:.6f}", f"{int(round(b.volume))}"]
            )


@dataclass(frozen=True, eq=False)
class AlignedPanel:
    """Date-aligned feature cube of shape (dates, tickers, 6).

    ``norm_mean`` / ``norm_std`` hold per-ticker, per-feature statistics of
    the transformed features (volume goes through log1p) and are fitted on
    the training split only.
    """

    dates: tuple[dt.date, ...]
    tickers: tuple[str, ...]
    features: np.ndarray
    norm_mean: np.ndarray | None = None
    norm_std: np.ndarray | None = None

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    @property
    def n_tickers(self) -> int:
        return len(self.tickers)

    @property
    def adj_close(self) -> np.ndarray:
        return self.features[:, :, ADJ_CLOSE]

    def index_range(self, start: dt.date | None, end: dt.date | None) -> tuple[int, int]:
        """Inclusive index bounds of panel dates inside ``[start, end]``."""
        idx = [i for i, d in enumerate(self.dates) if (start is None or d >= start) and (end is None or d <= end)]
        if not idx:
            raise DataError(f"no panel dates between {start} and {end}")
        return idx[0], idx[-1]

    def fit_normalization(self, start: dt.date | None, end: dt.date | None) -> "AlignedPanel":
        lo, hi = self.index_range(start, end)
        sample = _transform(self.features[lo : hi + 1])
        mean = sample.mean(axis=0)
        std = sample.std(axis=0)
        std = np.where(std > 1e-12, std, 1.0)
        return replace(self, norm_mean=mean, norm_std=std)

    @cached_property
    def normalized(self) -> np.ndarray:
        if self.norm_mean is None or self.norm_std is None:
            raise ContractError("panel has no normalisation statistics; call fit_normalization first")
        return (_transform(self.features) - self.norm_mean) / self.norm_std

    def to_bars(self) -> dict[str, list[OhlcvBar]]:
        out: dict[str, list[OhlcvBar]] = {}
        for j, ticker in enumerate(self.tickers):
            out[ticker] = [OhlcvBar(d, *map(float, self.features[i, j])) for i, d in enumerate(self.dates)]
        return out


def _transform(features: np.ndarray) -> np.ndarray:
    out = features.astype(np.float64).copy()
    out[..., VOLUME] = np.log1p(out[..., VOLUME])
    return out


def align(per_ticker_bars: Mapping[str, Sequence[OhlcvBar]]) -> AlignedPanel:
    """Keep only dates present for every ticker; ticker order is preserved."""
    if not per_ticker_bars:
        raise ContractError("align needs at least one ticker")
    common: set[dt.date] | None = None
    for ticker, bars in per_ticker_bars.items():
        if not bars:
            raise ContractError(f"ticker {ticker} has no bars")
        dates = {b.date for b in bars}
        common = dates if common is None else common & dates
    if not common:
        raise DataError("tickers share no common dates")
    dates = tuple(sorted(common))
    tickers = tuple(per_ticker_bars)
    cube = np.empty((len(dates), len(tickers), len(FEATURES)))
    for j, ticker in enumerate(tickers):
        lookup = {b.date: b for b in per_ticker_bars[ticker]}
        for i, d in enumerate(dates):
            cube[i, j] = lookup[d].as_row()
    return AlignedPanel(dates=dates, tickers=tickers, features=cube)


# ---------------------------------------------------------------------------
# dataset manifest
# ---------------------------------------------------------------------------


# Used when a manifest leaves a split edge out.
DEFAULT_SPLITS = {
    "train_start": dt.date(2009, 1, 1),
    "train_end": dt.date(2022, 1, 1),
    "test_start": dt.date(2022, 1, 2),
    "test_end": dt.date(2023, 1, 1),
}


@dataclass(frozen=True)
class Manifest:
    """Ticker -> CSV mapping plus split dates, as stored in a JSON manifest."""

    files: dict[str, Path]
    train_start: dt.date
    train_end: dt.date
    test_start: dt.date
    test_end: dt.date

    def with_splits(self, **overrides: dt.date | None) -> "Manifest":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_json(self, root: Path | None = None) -> dict:
        def rel(p: Path) -> str:
            if root is not None:
                try:
                    return str(p.relative_to(root))
                except ValueError:
                    pass
            return str(p)

        return {
            "tickers": {t: rel(p) for t, p in self.files.items()},
            "train_start": self.train_start.isoformat(),
            "train_end": self.train_end.isoformat(),
            "test_start": self.test_start.isoformat(),
            "test_end": self.test_end.isoformat(),
        }


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
        files = {t: (path.parent / p) for t, p in raw["tickers"].items()}
        splits = {k: parse_date(raw[k]) if raw.get(k) else d for k, d in DEFAULT_SPLITS.items()}
        return Manifest(files=files, **splits)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: invalid manifest ({exc})") from None


def save_manifest(path: str | Path, manifest: Manifest) -> None:
    path = Path(path)
    path.write_text(json.dumps(manifest.to_json(path.parent), indent=2) + "\n", encoding="utf-8")


def load_panel(manifest: Manifest) -> AlignedPanel:
    """Load, align and normalise (on the training split) every ticker."""
    bars = {}
    for ticker, file in manifest.files.items():
        if not Path(file).exists():
            raise FileNotFoundError(f"data file for {ticker} not found: {file}")
        bars[ticker] = load_csv(file)
    return align(bars).fit_normalization(manifest.train_start, manifest.train_end)
