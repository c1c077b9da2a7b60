"""Shared builders for cell and policy tests."""

import dataclasses

import numpy as np

from xlstm_trader.numerics import Tensor, gradient_check, mul, tsum
from xlstm_trader.policy import PolicyConfig, RecurrentPolicyState, evaluate_sequence, init_policy
from xlstm_trader.xlstm import (
    LstmState,
    MLstmParams,
    MLstmState,
    SLstmParams,
    SLstmState,
    init_lstm,
    init_mlstm,
    init_slstm,
    lstm_step,
    mlstm_step,
    slstm_step,
)

CELLS = {
    "slstm": (lambda d_in, d, H, rng: init_slstm(d_in, d, H, rng), lambda B, d, H: SLstmState.zeros(B, d), slstm_step),
    "mlstm": (lambda d_in, d, H, rng: init_mlstm(d_in, d, H, rng), lambda B, d, H: MLstmState.zeros(B, d, H), mlstm_step),
    "lstm": (lambda d_in, d, H, rng: init_lstm(d_in, d, rng), lambda B, d, H: LstmState.zeros(B, d), lstm_step),
}


def cell_rollout_loss(kind, params, xs, weights, n_heads=1):
    """sum_t <w_t, h_t> over a rollout from the zero state."""
    _, zeros, step = CELLS[kind]
    B, d = xs.shape[1], weights.shape[-1]
    state = zeros(B, d, n_heads)
    total = None
    for x, w in zip(xs, weights):
        h, state = step(params, state, Tensor(x))
        term = tsum(mul(h, w))
        total = term if total is None else total + term
    return total


def max_cell_gradient_error(kind, seed=0, d_in=3, d=4, n_heads=1, T=5, B=2):
    """Largest gradient_check error over every parameter of a T-step rollout."""
    rng = np.random.default_rng(seed)
    params = CELLS[kind][0](d_in, d, n_heads, rng)
    # random biases too, so the checked point is generic
    params.b.data = rng.uniform(-1, 1, params.b.shape)
    xs = rng.uniform(-2, 2, (T, B, d_in))
    weights = rng.standard_normal((T, B, d))
    worst = 0.0
    for f in dataclasses.fields(params):
        value = getattr(params, f.name)
        if not isinstance(value, Tensor):
            continue

        def loss(t, name=f.name):
            swapped = dataclasses.replace(params, **{name: t})
            return cell_rollout_loss(kind, swapped, xs, weights, n_heads)

        worst = max(worst, gradient_check(loss, Tensor(value.data.copy())))
    return worst


def small_slstm(rng, d_in, d):
    """Weights scaled so every preactivation stays in [-2, 2] for |x| <= 1."""
    bound = 1.0 / (d_in + d)
    W = rng.uniform(-bound, bound, (4 * d, d_in))
    R = rng.uniform(-bound, bound, (4 * d, d))
    b = rng.uniform(-1, 1, 4 * d)
    return W, R, b


def small_mlstm(rng, d_in, d, n_heads):
    bound = 1.0 / d_in
    rows = 4 * d + 2 * n_heads
    return rng.uniform(-bound, bound, (rows, d_in)), rng.uniform(-1, 1, rows)


def _small_policy(model, seed):
    cfg = PolicyConfig.for_model(model, 5, 2, embedding_dim=4)
    return cfg, init_policy(cfg, np.random.default_rng(seed))


def actor_rollout_gradient_error(model="xlstm", seed=0):
    """gradient_check over a selection of actor parameters for a 5-step log-prob loss."""
    cfg, params = _small_policy(model, seed)
    rng = np.random.default_rng(seed + 1)
    obs, acts = rng.uniform(-2, 2, (5, 5)), rng.uniform(-1, 1, (5, 2))
    params.log_std.data = rng.uniform(-0.5, 0.5, 2)
    targets = [
        (params.actor, "feat_W1"),
        (params.actor, "head_W"),
        (params, "log_std"),
        (params.actor.blocks[0].cell, "W"),
        (params.actor.blocks[-1].cell, "b"),
        (params.actor.blocks[0], "up_W"),
        (params.critic, "head_W"),
    ]
    worst = 0.0
    for owner, name in targets:
        original = getattr(owner, name)

        def loss(t, owner=owner, name=name, original=original):
            setattr(owner, name, t)
            try:
                lp, v, ent = evaluate_sequence(params, cfg, RecurrentPolicyState.zeros(cfg), obs, acts)
                return tsum(lp) + tsum(v * v) + ent
            finally:
                setattr(owner, name, original)

        worst = max(worst, gradient_check(loss, Tensor(original.data.copy())))
    return worst


def run_slstm(W, R, b, xs, n_heads=1):
    params = SLstmParams(Tensor(W), Tensor(R), Tensor(b), n_heads)
    state = SLstmState.zeros(1, R.shape[1])
    hs = []
    for x in xs:
        h, state = slstm_step(params, state, Tensor(x[None, :]))
        hs.append(h.data[0])
    return np.array(hs), state


def run_mlstm(W, b, xs, n_heads=1):
    params = MLstmParams(Tensor(W), Tensor(b), n_heads)
    d = params.hidden_size
    state = MLstmState.zeros(1, d, n_heads)
    hs = []
    for x in xs:
        h, state = mlstm_step(params, state, Tensor(x[None, :]))
        hs.append(h.data[0])
    return np.array(hs), state
