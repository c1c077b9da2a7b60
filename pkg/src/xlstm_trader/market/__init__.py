"""Market data: CSV ingestion, alignment, observations, turbulence, synthetic data."""

from .data import (
    CSV_HEADER,
    DEFAULT_SPLITS,
    FEATURES,
    AlignedPanel,
    Manifest,
    OhlcvBar,
    align,
    load_csv,
    load_manifest,
    load_panel,
    parse_date,
    save_manifest,
    write_csv,
)
from .features import build_observation, observation_size
from .synth import SynthConfig, generate_bars, write_market
from .turbulence import TurbulenceSeries, daily_returns, turbulence, turbulence_series

__all__ = [
    "CSV_HEADER",
    "DEFAULT_SPLITS",
    "FEATURES",
    "AlignedPanel",
    "Manifest",
    "OhlcvBar",
    "SynthConfig",
    "TurbulenceSeries",
    "align",
    "build_observation",
    "daily_returns",
    "generate_bars",
    "load_csv",
    "load_manifest",
    "load_panel",
    "observation_size",
    "parse_date",
    "save_manifest",
    "turbulence",
    "turbulence_series",
    "write_csv",
    "write_market",
]
