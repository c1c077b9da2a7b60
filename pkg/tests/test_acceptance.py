"""End-to-end acceptance checks; each test reports one PASS/FAIL line."""

import contextlib
import itertools
import json
import time

import numpy as np

import conftest
from helpers import actor_rollout_gradient_error, max_cell_gradient_error, run_mlstm, run_slstm, small_mlstm, small_slstm
from naive_cells import mlstm_naive, mlstm_naive_gates, slstm_naive, slstm_naive_pre
from xlstm_trader import kernels
from xlstm_trader.backtest import backtest_policy, backtest_random, backtest_zero
from xlstm_trader.cli import main
from xlstm_trader.env import EnvConfig, TradingEnv
from xlstm_trader.market import SynthConfig, load_manifest, load_panel, turbulence_series, write_market
from xlstm_trader.metrics import cumulative_return, max_earning_rate, max_pullback, max_pullback_bruteforce
from xlstm_trader.policy import PolicyConfig
from xlstm_trader.ppo import TrainConfig, compute_advantages, train


@contextlib.contextmanager
def criterion(n, title):
    detail = {}
    try:
        yield detail
    except BaseException:
        line = f"[{n}] FAIL {title} {detail.get('note', '')}".rstrip()
        raise
    else:
        line = f"[{n}] PASS {title} {detail.get('note', '')}".rstrip()
    finally:
        conftest.ACCEPTANCE_LINES[n] = line
        print(line)


def _market(tmp_path, **kw):
    m = load_manifest(write_market(tmp_path, SynthConfig(**kw)))
    panel = load_panel(m)
    return m, panel, turbulence_series(panel, m.train_start, m.train_end)


def test_1_gradient_fidelity():
    with criterion(1, "gradient fidelity") as d:
        t0 = time.perf_counter()
        errors = {kind: max_cell_gradient_error(kind, seed=0, T=5) for kind in ("slstm", "mlstm", "lstm")}
        errors["actor_xlstm"] = actor_rollout_gradient_error("xlstm", seed=0)
        errors["actor_lstm"] = actor_rollout_gradient_error("lstm", seed=0)
        elapsed = time.perf_counter() - t0
        d["note"] = f"max rel err {max(errors.values()):.2e} in {elapsed:.1f}s"
        assert all(e < 1e-4 for e in errors.values()), errors
        assert elapsed < 60.0


def test_2_stabilizer_equivalence():
    with criterion(2, "stabilizer equivalence") as d:
        worst = 0.0
        for draw in range(100):
            rng = np.random.default_rng(draw)
            xs = rng.uniform(-1, 1, (20, 3))
            W, R, b = small_slstm(rng, 3, 4)
            worst = max(worst, np.max(np.abs(run_slstm(W, R, b, xs)[0] - slstm_naive(W, R, b, xs))))
            Wm, bm = small_mlstm(rng, 3, 4, 1)
            worst = max(worst, np.max(np.abs(run_mlstm(Wm, bm, xs)[0] - mlstm_naive(Wm, bm, xs, 4, 1))))
        d["note"] = f"max abs diff {worst:.1e}"
        assert worst <= 1e-8

        rng = np.random.default_rng(0)
        pres = rng.uniform(-50, 50, (20, 4, 3))
        pres[:, 2] = 50.0
        assert not np.all(np.isfinite(slstm_naive_pre(pres)))
        c, n, m = np.zeros((1, 3)), np.zeros((1, 3)), np.zeros((1, 3))
        for pre in pres:
            h, c, n, m = kernels.impl.slstm_forward(np.ascontiguousarray(pre[None]), c, n, m)
            assert np.all(np.isfinite(h))

        T, dh = 20, 3
        q, k, v = (rng.uniform(-1, 1, (T, dh)) for _ in range(3))
        ig, fg, og = rng.uniform(-50, 50, T), np.full(T, 50.0), rng.uniform(-50, 50, T)
        assert not np.all(np.isfinite(mlstm_naive_gates(q, k, v, ig, fg, og)))
        C, nn, mm = np.zeros((1, 1, dh, dh)), np.zeros((1, 1, dh)), np.zeros((1, 1))
        for t in range(T):
            h, C, nn, mm = kernels.impl.mlstm_forward(
                q[t][None], k[t][None], v[t][None], ig[t].reshape(1, 1), fg[t].reshape(1, 1),
                np.full((1, dh), og[t]), C, nn, mm,
            )
            assert np.all(np.isfinite(h))


def test_3_accounting_soundness(tmp_path):
    with criterion(3, "accounting soundness") as d:
        m, panel, turb = _market(tmp_path, n_days=600, tickers=("AAA", "BBB", "CCC"), vol=0.02, seed=3)
        env = TradingEnv.for_dates(panel, turb, EnvConfig(window=5), m.train_start, m.train_end)
        rng = np.random.default_rng(0)
        env.reset()
        worst = 0.0
        for _ in range(10_000):
            before = env.state.copy()
            prices = panel.adj_close[before.day]
            res = env.step(rng.uniform(-1, 1, env.n_assets))
            after = env.state
            assert after.balance >= 0.0 and np.all(after.shares >= 0)
            marked = after.balance + after.shares @ panel.adj_close[after.day]
            worst = max(worst, abs(res.info.total_value - marked) / marked)
            # trading at today's prices only moves value by the fees paid
            pre = before.balance + before.shares @ prices
            post = after.balance + after.shares @ prices
            worst = max(worst, abs((pre - res.info.cost) - post) / pre)
            if res.done:
                env.reset()
        d["note"] = f"max rel identity error {worst:.1e}"
        assert worst <= 1e-6


def test_4_penalty_and_one_step_advantage(tmp_path):
    with criterion(4, "reward/penalty exactness") as d:
        m, panel, turb = _market(tmp_path, n_days=700, tickers=("AAA", "BBB"), vol=0.02, seed=5)
        warm = turb.values[turb.values > 0]
        threshold = float(np.quantile(warm, 0.5))
        env = TradingEnv.for_dates(panel, turb, EnvConfig(window=5, turbulence_threshold=threshold),
                                   m.train_start, m.test_end)
        rng = np.random.default_rng(1)
        env.reset()
        turbulent = 0
        done = False
        while not done:
            res = env.step(rng.uniform(-1, 1, env.n_assets))
            done = res.done
            if res.info.turbulence > threshold:
                turbulent += 1
                assert res.reward == -1.0 and res.info.trades == {} and not np.any(res.info.executed)
        assert turbulent > 10

        rng = np.random.default_rng(2)
        for _ in range(1000):
            T = int(rng.integers(1, 30))
            r, v = rng.normal(size=T), rng.normal(size=T)
            dones, boot, gamma = rng.random(T) < 0.1, float(rng.normal()), float(rng.uniform(0.5, 1.0))
            adv, _ = compute_advantages(r, v, dones, boot, gamma, 0.0)
            nxt = np.append(v[1:], boot)
            expected = np.where(dones, r - v, (r + gamma * nxt) - v)
            assert np.array_equal(adv, expected)
        d["note"] = f"{turbulent} turbulent steps, 1000 advantage draws"


def test_5_metric_oracles():
    with criterion(5, "metric oracles") as d:
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(1, 200))
            curve = 1e6 * np.exp(np.cumsum(rng.normal(0, 0.02, n)))
            assert max_pullback(curve) == max_pullback_bruteforce(curve)
            assert max_earning_rate(curve) >= cumulative_return(curve)
        cr = cumulative_return([1_000_000.0, 1_531_100.0])
        d["note"] = f"CR example {cr:.12f}"
        assert abs(cr - 53.11) <= 1e-9


LEARN_SEEDS = range(5)


def test_6_learning_sanity(tmp_path):
    with criterion(6, "learning sanity") as d:
        t0 = time.perf_counter()
        m, panel, turb = _market(tmp_path, n_days=1000)
        assert panel.n_tickers == 1
        cfg = EnvConfig(window=5)
        env = TradingEnv.for_dates(panel, turb, cfg, m.train_start, m.train_end)
        test_env = TradingEnv.for_dates(panel, turb, cfg, m.test_start, m.test_end)
        policy = PolicyConfig.for_model("xlstm", env.obs_dim, env.n_assets, embedding_dim=16)
        zero = backtest_zero(test_env).report.cr
        random_cr = float(np.median([backtest_random(test_env, s).report.cr for s in LEARN_SEEDS]))
        crs = []
        for seed in LEARN_SEEDS:
            tc = TrainConfig(seed=seed, epochs=4, gae_lambda=0.95, total_timesteps=20_000)
            params, _ = train(tc, env, policy)
            crs.append(backtest_policy(test_env, policy, params).report.cr)
        median = float(np.median(crs))
        elapsed = time.perf_counter() - t0
        d["note"] = (f"median CR {median:.2f} vs zero {zero:.2f}, random {random_cr:.2f} "
                     f"(seeds {[round(c, 2) for c in crs]}, {elapsed / 60:.1f} min)")
        assert median > zero and median > random_cr
        assert elapsed < 30 * 60


def test_7_comparison_harness(tmp_path, capsys):
    with criterion(7, "comparison harness") as d:
        data = tmp_path / "data"
        assert main(["synth", "--out", str(data)]) == 0
        out = tmp_path / "cmp"
        code = main(["compare", "--paper-presets", "--manifest", str(data / "manifest.json"), "--out", str(out),
                     "--embedding-dim", "4", "--timesteps", "32", "--horizon", "32", "--epochs", "1"])
        assert code == 0
        rows = json.loads((out / "compare.json").read_text())["rows"]
        got = {(r["model"], r["window"]) for r in rows}
        assert len(rows) == 6 and got == set(itertools.product(("xlstm", "lstm"), (30, 15, 5)))
        assert {r["batch_size"] for r in rows if r["model"] == "xlstm"} == {32}
        assert {r["batch_size"] for r in rows if r["model"] == "lstm"} == {64}
        assert all({"cr", "mer", "mpb", "n_trades"} <= set(r) for r in rows)
        header = (out / "compare.txt").read_text().splitlines()[0].split()
        assert header == ["Model", "Window", "Batch", "CR%", "MER%", "MPB%", "APPT", "SR", "Trades"]
        d["note"] = f"{len(rows)} rows"


def test_8_determinism(tmp_path):
    with criterion(8, "determinism") as d:
        data = tmp_path / "data"
        assert main(["synth", "--out", str(data), "--days", "400", "--seed", "2"]) == 0
        args = ["--manifest", str(data / "manifest.json"), "--window", "10", "--embedding-dim", "8",
                "--timesteps", "300", "--horizon", "100", "--epochs", "2", "--seed", "9"]
        for run in ("a", "b"):
            assert main(["train", "--out", str(tmp_path / run), *args]) == 0
            assert main(["backtest", "--run", str(tmp_path / run)]) == 0
        files = ["train_log.jsonl", "checkpoint.xltr", "backtest/report.json", "backtest/equity.csv",
                 "backtest/trace.csv"]
        for rel in files:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), rel
        assert len((tmp_path / "a" / "train_log.jsonl").read_text().splitlines()) == 3
        d["note"] = f"{len(files)} artifacts identical"
