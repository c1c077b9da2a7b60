"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N] [--batch B] [--dim D]

Reports microseconds per call for each fused cell kernel and for one
policy ``act`` step, per available backend.
"""

from __future__ import annotations

import argparse
import timeit
from typing import Callable

import numpy as np

from xlstm_trader import kernels
from xlstm_trader.policy import PolicyConfig, RecurrentPolicyState, act, init_policy


def kernel_cases(B: int, d: int, H: int, rng: np.random.Generator) -> dict:
    dh = d // H
    pre = rng.uniform(-2, 2, (B, 4, d))
    c, n, m = rng.normal(size=(B, d)), rng.uniform(0.5, 2, (B, d)), rng.normal(size=(B, d))
    q, k, v = (rng.normal(size=(B, d)) for _ in range(3))
    ig, fg, mm = (rng.normal(size=(B, H)) for _ in range(3))
    og = rng.normal(size=(B, d))
    C, nn = rng.normal(size=(B, H, dh, dh)), rng.normal(size=(B, H, dh))
    g = rng.normal(size=(B, d))
    return {
        "slstm_forward": lambda: kernels.impl.slstm_forward(pre, c, n, m),
        "slstm_backward": lambda: kernels.impl.slstm_backward(pre, c, n, m, g, g, g),
        "mlstm_forward": lambda: kernels.impl.mlstm_forward(q, k, v, ig, fg, og, C, nn, mm),
        "mlstm_backward": lambda: kernels.impl.mlstm_backward(q, k, v, ig, fg, og, C, nn, mm, g, C, nn),
        "lstm_forward": lambda: kernels.impl.lstm_forward(pre, c),
        "lstm_backward": lambda: kernels.impl.lstm_backward(pre, c, g, g),
    }


def policy_case(d: int) -> Callable[[], object]:
    cfg = PolicyConfig.for_model("xlstm", obs_dim=40, n_assets=3, embedding_dim=d)
    params = init_policy(cfg, np.random.default_rng(0))
    state = RecurrentPolicyState.zeros(cfg)
    obs = np.random.default_rng(1).normal(size=40)
    return lambda: act(params, cfg, state, obs, deterministic=True)


def bench(fn, repeat: int) -> float:
    fn()
    return min(timeit.repeat(fn, number=repeat, repeat=3)) / repeat * 1e6


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=2000)
    ap.add_argument("--batch", type=int, default=4)
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--heads", type=int, default=4)
    args = ap.parse_args()

    backends = kernels.available_backends()
    rows: dict[str, dict[str, float]] = {}
    for name in backends:
        with kernels.use_backend(name):
            cases = kernel_cases(args.batch, args.dim, args.heads, np.random.default_rng(0))
            cases["policy_act"] = policy_case(args.dim)
            for case, fn in cases.items():
                reps = args.repeat // 10 if case == "policy_act" else args.repeat
                rows.setdefault(case, {})[name] = bench(fn, max(1, reps))

    print(f"batch={args.batch} dim={args.dim} heads={args.heads}  (us per call)")
    header = f"{'case':<16}" + "".join(f"{b:>12}" for b in backends)
    if len(backends) > 1:
        header += f"{'speedup':>10}"
    print(header)
    for case, times in rows.items():
        line = f"{case:<16}" + "".join(f"{times[b]:>12.1f}" for b in backends)
        if "cython" in times and "python" in times:
            line += f"{times['python'] / times['cython']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
