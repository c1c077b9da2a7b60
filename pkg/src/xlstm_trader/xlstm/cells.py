"""sLSTM, mLSTM and classic LSTM cells.

Each cell is a pure function ``step(params, state, x) -> (h, new_state)``
over batched inputs ``x`` of shape (B, d_in). Input-side and recurrent
matmuls run through the autodiff engine; the gating arithmetic runs in one
fused kernel per step (see :mod:`xlstm_trader.kernels`).

sLSTM recurrence, with ``~`` marking preactivations:

    z = tanh(~z)   i = exp(~i)   f = exp(~f)   o = sigmoid(~o)
    c' = f c + i z     n' = f n + i     h = o * c' / n'

stabilised with ``m' = max(~f + m, ~i)`` so that ``i -> exp(~i - m')`` and
``f -> exp(~f + m - m')``. The mLSTM keeps a per-head matrix memory:

    C' = f C + i v k^T     n' = f n + i k
    h  = o * (C' q) / max(|n'^T q|, 1)

where the stabilised form divides by ``max(|n'^T q|, exp(-m'))``; both give
the same ``h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..errors import DimensionError
from ..numerics import Tensor, custom_op, linear, mul, reshape


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> Tensor:
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def _contig(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def _check_input(x: Tensor, d_in: int, cell: str) -> None:
    if x.ndim != 2 or x.shape[1] != d_in:
        raise DimensionError(f"{cell}: expected input of shape (B, {d_in}), got {x.shape}")


# ---------------------------------------------------------------------------
# sLSTM
# ---------------------------------------------------------------------------


@dataclass
class SLstmParams:
    """Stacked weights; row blocks of W, R and b are ordered z, i, f, o.

    ``R`` is block-diagonal across heads: entries outside a head block are
    masked out in every forward pass.
    """

    W: Tensor  # (4d, d_in)
    R: Tensor  # (4d, d)
    b: Tensor  # (4d,)
    n_heads: int = field(default=1, metadata={"static": True})

    @property
    def hidden_size(self) -> int:
        return self.R.shape[1]

    @property
    def input_size(self) -> int:
        return self.W.shape[1]


@dataclass
class SLstmState:
    h: Tensor
    c: Tensor
    n: Tensor
    m: Tensor

    @classmethod
    def zeros(cls, batch: int, hidden: int) -> "SLstmState":
        return cls(*(Tensor(np.zeros((batch, hidden))) for _ in range(4)))


def init_slstm(d_in: int, d: int, n_heads: int, rng: np.random.Generator) -> SLstmParams:
    if d % n_heads:
        raise DimensionError(f"hidden size {d} not divisible by {n_heads} heads")
    W = _uniform(rng, (4 * d, d_in), d_in)
    R = _uniform(rng, (4 * d, d), d // n_heads)
    R.data = R.data * _head_mask(d, n_heads)
    b = np.zeros(4 * d)
    b[2 * d : 3 * d] = 1.0
    return SLstmParams(W=W, R=R, b=Tensor(b, requires_grad=True), n_heads=n_heads)


def _head_mask(d: int, n_heads: int) -> np.ndarray:
    dh = d // n_heads
    block = np.kron(np.eye(n_heads), np.ones((dh, dh)))
    return np.tile(block, (4, 1))


def _slstm_pointwise(pre: Tensor, c: Tensor, n: Tensor, m: Tensor):
    k = kernels.impl
    pre_a, c_a, n_a, m_a = _contig(pre.data), _contig(c.data), _contig(n.data), _contig(m.data)
    h, c_new, n_new, m_new = k.slstm_forward(pre_a, c_a, n_a, m_a)

    def bw(grads):
        gh, gc, gn = (_contig(g) for g in grads)
        return k.slstm_backward(pre_a, c_a, n_a, m_a, gh, gc, gn)

    h_t, c_t, n_t = custom_op((pre, c, n), (h, c_new, n_new), bw)
    return h_t, c_t, n_t, Tensor(m_new)


def slstm_step(params: SLstmParams, state: SLstmState, x: Tensor) -> tuple[Tensor, SLstmState]:
    d = params.hidden_size
    _check_input(x, params.input_size, "sLSTM")
    if state.h.shape != (x.shape[0], d):
        raise DimensionError(f"sLSTM: state shape {state.h.shape} does not match ({x.shape[0]}, {d})")
    R = params.R if params.n_heads == 1 else mul(params.R, _head_mask(d, params.n_heads))
    pre = linear(x, params.W, params.b) + linear(state.h, R)
    pre = reshape(pre, (x.shape[0], 4, d))
    h, c, n, m = _slstm_pointwise(pre, state.c, state.n, state.m)
    return h, SLstmState(h=h, c=c, n=n, m=m)


# ---------------------------------------------------------------------------
# mLSTM
# ---------------------------------------------------------------------------


@dataclass
class MLstmParams:
    """One stacked input projection.

    Output rows of ``W``/``b``: q, k, v, o (``d`` each) then the input and
    forget gate preactivations (one scalar per head each).
    """

    W: Tensor  # (4d + 2H, d_in)
    b: Tensor  # (4d + 2H,)
    n_heads: int = field(default=1, metadata={"static": True})

    @property
    def hidden_size(self) -> int:
        return (self.W.shape[0] - 2 * self.n_heads) // 4

    @property
    def input_size(self) -> int:
        return self.W.shape[1]


@dataclass
class MLstmState:
    C: Tensor  # (B, H, dh, dh)
    n: Tensor  # (B, H, dh)
    m: Tensor  # (B, H)

    @classmethod
    def zeros(cls, batch: int, hidden: int, n_heads: int) -> "MLstmState":
        dh = hidden // n_heads
        return cls(
            C=Tensor(np.zeros((batch, n_heads, dh, dh))),
            n=Tensor(np.zeros((batch, n_heads, dh))),
            m=Tensor(np.zeros((batch, n_heads))),
        )


def init_mlstm(d_in: int, d: int, n_heads: int, rng: np.random.Generator) -> MLstmParams:
    if d % n_heads:
        raise DimensionError(f"hidden size {d} not divisible by {n_heads} heads")
    W = _uniform(rng, (4 * d + 2 * n_heads, d_in), d_in)
    b = np.zeros(4 * d + 2 * n_heads)
    b[4 * d + n_heads :] = 1.0
    return MLstmParams(W=W, b=Tensor(b, requires_grad=True), n_heads=n_heads)


def _mlstm_pointwise(proj: Tensor, C: Tensor, n: Tensor, m: Tensor, d: int, n_heads: int):
    k = kernels.impl
    p = proj.data
    scale = 1.0 / math.sqrt(d // n_heads)
    q = _contig(p[:, :d])
    key = _contig(p[:, d : 2 * d] * scale)
    v = _contig(p[:, 2 * d : 3 * d])
    og = _contig(p[:, 3 * d : 4 * d])
    ig = _contig(p[:, 4 * d : 4 * d + n_heads])
    fg = _contig(p[:, 4 * d + n_heads :])
    C_a, n_a, m_a = _contig(C.data), _contig(n.data), _contig(m.data)
    h, C_new, n_new, m_new = k.mlstm_forward(q, key, v, ig, fg, og, C_a, n_a, m_a)

    def bw(grads):
        gh, gC, gn = (_contig(g) for g in grads)
        gq, gk, gv, gig, gfg, gog, gC_prev, gn_prev = k.mlstm_backward(
            q, key, v, ig, fg, og, C_a, n_a, m_a, gh, gC, gn
        )
        gproj = np.concatenate([gq, gk * scale, gv, gog, gig, gfg], axis=1)
        return gproj, gC_prev, gn_prev

    h_t, C_t, n_t = custom_op((proj, C, n), (h, C_new, n_new), bw)
    return h_t, C_t, n_t, Tensor(m_new)


def mlstm_step(params: MLstmParams, state: MLstmState, x: Tensor) -> tuple[Tensor, MLstmState]:
    d, H = params.hidden_size, params.n_heads
    _check_input(x, params.input_size, "mLSTM")
    if state.m.shape != (x.shape[0], H):
        raise DimensionError(f"mLSTM: state shape {state.m.shape} does not match ({x.shape[0]}, {H})")
    proj = linear(x, params.W, params.b)
    h, C, n, m = _mlstm_pointwise(proj, state.C, state.n, state.m, d, H)
    return h, MLstmState(C=C, n=n, m=m)


# ---------------------------------------------------------------------------
# classic LSTM (baseline)
# ---------------------------------------------------------------------------


@dataclass
class LstmParams:
    """Row blocks ordered i, f, g, o (sigmoid, sigmoid, tanh, sigmoid)."""

    W: Tensor  # (4d, d_in)
    R: Tensor  # (4d, d)
    b: Tensor  # (4d,)

    @property
    def hidden_size(self) -> int:
        return self.R.shape[1]

    @property
    def input_size(self) -> int:
        return self.W.shape[1]


@dataclass
class LstmState:
    h: Tensor
    c: Tensor

    @classmethod
    def zeros(cls, batch: int, hidden: int) -> "LstmState":
        return cls(h=Tensor(np.zeros((batch, hidden))), c=Tensor(np.zeros((batch, hidden))))


def init_lstm(d_in: int, d: int, rng: np.random.Generator) -> LstmParams:
    return LstmParams(
        W=_uniform(rng, (4 * d, d_in), d_in),
        R=_uniform(rng, (4 * d, d), d),
        b=Tensor(np.zeros(4 * d), requires_grad=True),
    )


def _lstm_pointwise(pre: Tensor, c: Tensor):
    k = kernels.impl
    pre_a, c_a = _contig(pre.data), _contig(c.data)
    h, c_new = k.lstm_forward(pre_a, c_a)

    def bw(grads):
        gh, gc = (_contig(g) for g in grads)
        return k.lstm_backward(pre_a, c_a, gh, gc)

    h_t, c_t = custom_op((pre, c), (h, c_new), bw)
    return h_t, c_t


def lstm_step(params: LstmParams, state: LstmState, x: Tensor) -> tuple[Tensor, LstmState]:
    d = params.hidden_size
    _check_input(x, params.input_size, "LSTM")
    if state.h.shape != (x.shape[0], d):
        raise DimensionError(f"LSTM: state shape {state.h.shape} does not match ({x.shape[0]}, {d})")
    pre = linear(x, params.W, params.b) + linear(state.h, params.R)
    pre = reshape(pre, (x.shape[0], 4, d))
    h, c = _lstm_pointwise(pre, state.c)
    return h, LstmState(h=h, c=c)
