"""Command-line entry point: ``synth``, ``train``, ``backtest`` and ``compare``.

Exit codes: 0 success, 2 usage/config, 3 data, 4 numeric failure,
5 checkpoint mismatch.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .backtest import BacktestResult, backtest_policy
from .env import EnvConfig, TradingEnv, write_trace
from .errors import CheckpointError, ContractError, DataError, DimensionError, NonFiniteError, ParseError, TrainingError
from .market import AlignedPanel, SynthConfig, TurbulenceSeries, load_manifest, load_panel, parse_date, turbulence_series
from .market import write_market
from .metrics import write_equity_csv
from .numerics import load_checkpoint, save_checkpoint
from .params import load_state_dict, state_dict
from .policy import MODEL_LAYERS, PolicyConfig, init_policy
from .ppo import TrainConfig, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC, EXIT_CHECKPOINT = 0, 2, 3, 4, 5

PRESET_WINDOWS = (30, 15, 5)
PRESET_BATCH = {"xlstm": 32, "lstm": 64}

CONFIG_FILE = "config.json"
CHECKPOINT_FILE = "checkpoint.xltr"
LOG_FILE = "train_log.jsonl"

log = logging.getLogger("xlstm_trader")


class ConfigError(ContractError):
    """Invalid or inconsistent run configuration."""


_TRAIN_FIELDS = {f.name for f in dataclasses.fields(TrainConfig)} - {"seed"}


@dataclass
class RunConfig:
    """Everything needed to reproduce one train + backtest run."""

    manifest: str
    out: str = "runs/default"
    model: str = "xlstm"
    window: int = 30
    embedding_dim: int = 128
    n_heads: int = 1
    seed: int = 0
    train_start: str | None = None
    train_end: str | None = None
    test_start: str | None = None
    test_end: str | None = None
    initial_balance: float = 1_000_000.0
    h_max: int = 100
    cost_rate: float = 0.001
    turbulence_threshold: float | None = None
    trade_through_turbulence: bool = False
    train: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.model not in MODEL_LAYERS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {sorted(MODEL_LAYERS)}")
        if not isinstance(self.window, int) or self.window < 1:
            raise ConfigError(f"window must be an integer >= 1, got {self.window!r}")
        if self.embedding_dim < 1 or self.n_heads < 1 or self.embedding_dim % self.n_heads:
            raise ConfigError("embedding_dim must be a positive multiple of n_heads")
        unknown = set(self.train) - _TRAIN_FIELDS
        if unknown:
            raise ConfigError(f"unknown train settings: {sorted(unknown)}")
        self.train_config()
        self.env_config()

    def train_config(self) -> TrainConfig:
        try:
            return TrainConfig(seed=self.seed, **self.train)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def env_config(self) -> EnvConfig:
        return EnvConfig(
            initial_balance=self.initial_balance,
            h_max=self.h_max,
            cost_rate=self.cost_rate,
            turbulence_threshold=self.turbulence_threshold,
            window=self.window,
            block_turbulent_trades=not self.trade_through_turbulence,
        )

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - names - {"derived"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "manifest" not in raw or raw["manifest"] is None:
            raise ConfigError("a dataset manifest is required (--manifest or config file)")
        cfg = cls(**{k: v for k, v in raw.items() if k in names})
        cfg.train = dict(cfg.train)
        return cfg


@dataclass
class Workspace:
    """Loaded data plus train/test environments for one run config."""

    config: RunConfig
    panel: AlignedPanel
    turbulence: TurbulenceSeries
    train_env: TradingEnv
    test_env: TradingEnv
    policy: PolicyConfig


def _date(text: str | None) -> dt.date | None:
    return None if text is None else parse_date(text)


def resolve(config: RunConfig) -> tuple[RunConfig, Workspace]:
    """Load data and materialize every default (splits, seq_len, horizon)."""
    config.validate()
    manifest_path = Path(config.manifest)
    if not manifest_path.exists():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    manifest = load_manifest(manifest_path).with_splits(
        train_start=_date(config.train_start),
        train_end=_date(config.train_end),
        test_start=_date(config.test_start),
        test_end=_date(config.test_end),
    )
    if manifest.train_start > manifest.train_end or manifest.test_start > manifest.test_end:
        raise ConfigError("split start dates must not follow their end dates")
    panel = load_panel(manifest)
    turb = turbulence_series(panel, manifest.train_start, manifest.train_end)
    env_cfg = config.env_config()
    train_env = TradingEnv.for_dates(panel, turb, env_cfg, manifest.train_start, manifest.train_end)
    test_env = TradingEnv.for_dates(panel, turb, env_cfg, manifest.test_start, manifest.test_end)
    tc = config.train_config().resolved(config.window, train_env.episode_length)
    resolved = dataclasses.replace(
        config,
        train_start=manifest.train_start.isoformat(),
        train_end=manifest.train_end.isoformat(),
        test_start=manifest.test_start.isoformat(),
        test_end=manifest.test_end.isoformat(),
        train={k: v for k, v in dataclasses.asdict(tc).items() if k != "seed"},
    )
    policy = PolicyConfig.for_model(
        config.model, train_env.obs_dim, train_env.n_assets, embedding_dim=config.embedding_dim, n_heads=config.n_heads
    )
    return resolved, Workspace(resolved, panel, turb, train_env, test_env, policy)


def _echo(config: RunConfig, ws: Workspace) -> str:
    data = dataclasses.asdict(config)
    threshold = ws.train_env.config.turbulence_threshold
    data["derived"] = {
        "obs_dim": ws.policy.obs_dim,
        "n_assets": ws.policy.n_assets,
        "tickers": list(ws.panel.tickers),
        "turbulence_threshold": threshold if np.isfinite(threshold) else "inf",
        "train_steps_per_episode": ws.train_env.episode_length,
        "test_steps_per_episode": ws.test_env.episode_length,
    }
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def cmd_train(config: RunConfig) -> Path:
    """Train and write config echo, JSON-lines log and checkpoint into ``config.out``."""
    config, ws = resolve(config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_FILE).write_text(_echo(config, ws), encoding="utf-8")
    with open(out / LOG_FILE, "w", encoding="utf-8") as fh:
        def on_update(stats):
            fh.write(stats.to_json() + "\n")
            fh.flush()
            log.info("update %d: %d steps, episode return %s", stats.update, stats.timesteps, stats.mean_episode_return)

        params, _ = train(config.train_config(), ws.train_env, ws.policy, on_update=on_update)
    save_checkpoint(out / CHECKPOINT_FILE, state_dict(params))
    return out / CHECKPOINT_FILE


def load_run_config(path: str | Path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return RunConfig.from_dict(raw)


def cmd_backtest(checkpoint: str | Path, config: RunConfig, out: str | Path) -> BacktestResult:
    """Deterministic test-split rollout; writes report.json, equity.csv and trace.csv."""
    config, ws = resolve(config)
    params = init_policy(ws.policy, np.random.default_rng(0))
    load_state_dict(params, load_checkpoint(checkpoint))
    result = backtest_policy(ws.test_env, ws.policy, params)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(result.report.to_json(), encoding="utf-8")
    write_equity_csv(out / "equity.csv", result.curve)
    write_trace(out / "trace.csv", ws.panel.tickers, result.infos, result.rewards)
    return result


def check_same_split(configs: Sequence[RunConfig]) -> None:
    keys = {(c.manifest, c.train_start, c.train_end, c.test_start, c.test_end, c.seed) for c in configs}
    if len(keys) != 1:
        raise ConfigError("compared runs must share the dataset, splits and seed")


def compare_plan(base: RunConfig, paper_presets: bool) -> list[RunConfig]:
    """One run per (window, model); presets fix windows 30/15/5 and batch 32 (xlstm) / 64 (lstm)."""
    windows = PRESET_WINDOWS if paper_presets else (base.window,)
    plan = []
    for window in windows:
        for model in ("xlstm", "lstm"):
            train_over = dict(base.train)
            if paper_presets:
                train_over["batch_size"] = PRESET_BATCH[model]
            plan.append(dataclasses.replace(
                base,
                model=model,
                window=window,
                train=train_over,
                out=str(Path(base.out) / f"{model}_w{window}"),
            ))
    return plan


def format_table(rows: Sequence[dict]) -> str:
    cols = [("model", "Model"), ("window", "Window"), ("batch_size", "Batch"), ("cr", "CR%"), ("mer", "MER%"),
            ("mpb", "MPB%"), ("appt", "APPT"), ("sharpe", "SR"), ("n_trades", "Trades")]

    def cell(v):
        if v is None:
            return "-"
        return f"{v:.2f}" if isinstance(v, float) else str(v)

    table = [[title for _, title in cols]] + [[cell(r.get(k)) for k, _ in cols] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
    lines = ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def cmd_compare(base: RunConfig, paper_presets: bool = False) -> dict:
    """Train and backtest both model kinds on identical data; write compare.json/.txt."""
    plan = compare_plan(base, paper_presets)
    resolved = [resolve(c)[0] for c in plan]
    check_same_split(resolved)
    rows, configs = [], []
    for cfg in resolved:
        ckpt = cmd_train(cfg)
        result = cmd_backtest(ckpt, cfg, Path(cfg.out) / "backtest")
        rows.append({"model": cfg.model, "window": cfg.window, "batch_size": cfg.train["batch_size"],
                     **result.report.to_dict()})
        configs.append(dataclasses.asdict(cfg))
    report = {"rows": rows, "configs": configs}
    out = Path(base.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "compare.txt").write_text(format_table(rows), encoding="utf-8")
    return report


# argument parsing ---------------------------------------------------------

def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config; flags given on the command line override it")
    p.add_argument("--manifest")
    p.add_argument("--out")
    p.add_argument("--model", choices=sorted(MODEL_LAYERS))
    p.add_argument("--window", type=int)
    p.add_argument("--embedding-dim", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--train-start")
    p.add_argument("--train-end")
    p.add_argument("--test-start")
    p.add_argument("--test-end")
    p.add_argument("--trade-through-turbulence", action="store_true", default=None,
                   help="execute actions on turbulent days (the -1 reward still applies)")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--timesteps", type=int, dest="total_timesteps")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--gae-lambda", type=float)
    p.add_argument("--horizon", type=int)
    p.add_argument("--seq-len", type=int)


_TOP_FLAGS = ("manifest", "out", "model", "window", "embedding_dim", "seed", "train_start", "train_end",
              "test_start", "test_end", "trade_through_turbulence")
_TRAIN_FLAGS = ("batch_size", "total_timesteps", "epochs", "learning_rate", "gae_lambda", "horizon", "seq_len")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    raw: dict = {}
    if args.config:
        raw = dataclasses.asdict(load_run_config(args.config))
    for name in _TOP_FLAGS:
        value = getattr(args, name)
        if value is not None:
            raw[name] = value
    train_over = dict(raw.get("train", {}))
    for name in _TRAIN_FLAGS:
        value = getattr(args, name)
        if value is not None:
            train_over[name] = value
    raw["train"] = train_over
    return RunConfig.from_dict(raw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xlstm-trader", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a seeded synthetic market (CSV files + manifest.json)")
    p.add_argument("--out", required=True)
    p.add_argument("--days", type=int, default=SynthConfig.n_days)
    p.add_argument("--tickers", default=",".join(SynthConfig.tickers))
    p.add_argument("--drift", type=float, default=SynthConfig.drift)
    p.add_argument("--vol", type=float, default=SynthConfig.vol)
    p.add_argument("--seed", type=int, default=SynthConfig.seed)

    _run_flags(sub.add_parser("train", help="train a policy; writes checkpoint, log and config echo"))

    p = sub.add_parser("backtest", help="deterministic test-split rollout of a checkpoint")
    p.add_argument("--run", help="training run directory (reads its config echo and checkpoint)")
    p.add_argument("--checkpoint")
    _run_flags(p)

    p = sub.add_parser("compare", help="train and backtest xlstm and lstm side by side")
    p.add_argument("--paper-presets", action="store_true", help="windows 30/15/5; batch 32 for xlstm, 64 for lstm")
    _run_flags(p)
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "synth":
        tickers = tuple(t for t in args.tickers.split(",") if t)
        if args.days < 3 or not tickers:
            raise ConfigError("synth needs at least 3 days and one ticker")
        path = write_market(args.out, SynthConfig(n_days=args.days, tickers=tickers, drift=args.drift,
                                                  vol=args.vol, seed=args.seed))
        print(path)
        return EXIT_OK
    if args.command == "backtest" and args.run:
        run = Path(args.run)
        if args.config is None:
            args.config = str(run / CONFIG_FILE)
        if args.checkpoint is None:
            args.checkpoint = str(run / CHECKPOINT_FILE)
        if args.out is None:
            args.out = str(run / "backtest")
    config = config_from_args(args)
    if args.command == "train":
        print(cmd_train(config))
    elif args.command == "backtest":
        if args.checkpoint is None:
            raise ConfigError("backtest needs --checkpoint or --run")
        result = cmd_backtest(args.checkpoint, config, config.out)
        print(result.report.to_json(), end="")
    else:
        report = cmd_compare(config, paper_presets=args.paper_presets)
        print(format_table(report["rows"]), end="")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except (ConfigError, ContractError) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, ParseError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingError, NonFiniteError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        dump = getattr(exc, "dump", None)
        if dump:
            print(json.dumps(dump)[:2000], file=sys.stderr)
        return EXIT_NUMERIC
    except (CheckpointError, DimensionError) as exc:
        print(f"checkpoint mismatch: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT


if __name__ == "__main__":
    sys.exit(main())
