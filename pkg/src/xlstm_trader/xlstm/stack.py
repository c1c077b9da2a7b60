"""Residual pre-norm block stack over sLSTM / mLSTM / LSTM cells.

Per block:

    u = x + cell(layernorm(x))
    y = u + down(gelu(up(layernorm(u))))
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from ..errors import ContractError, DimensionError
from ..numerics import Tensor, gelu, layernorm, linear
from .cells import (
    LstmParams,
    LstmState,
    MLstmParams,
    MLstmState,
    SLstmParams,
    SLstmState,
    _uniform,
    init_lstm,
    init_mlstm,
    init_slstm,
    lstm_step,
    mlstm_step,
    slstm_step,
)

CELL_KINDS = ("slstm", "mlstm", "lstm")

CellParams = Union[SLstmParams, MLstmParams, LstmParams]
CellState = Union[SLstmState, MLstmState, LstmState]


@dataclass(frozen=True)
class BlockStackConfig:
    embedding_dim: int = 128
    layers: tuple[str, ...] = ("mlstm", "slstm")
    n_heads: int = 1
    mlp_expansion: float = 2.0
    layernorm_eps: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ContractError("block stack needs at least one layer")
        unknown = [k for k in self.layers if k not in CELL_KINDS]
        if unknown:
            raise ContractError(f"unknown cell kinds {unknown}; choose from {CELL_KINDS}")
        if self.embedding_dim < 1 or self.embedding_dim % self.n_heads:
            raise ContractError(f"embedding_dim {self.embedding_dim} not divisible by n_heads {self.n_heads}")
        if self.mlp_expansion <= 0:
            raise ContractError("mlp_expansion must be positive")

    @property
    def mlp_width(self) -> int:
        return max(1, int(round(self.embedding_dim * self.mlp_expansion)))


@dataclass
class BlockParams:
    norm1_scale: Tensor
    norm1_shift: Tensor
    cell: CellParams
    norm2_scale: Tensor
    norm2_shift: Tensor
    up_W: Tensor
    up_b: Tensor
    down_W: Tensor
    down_b: Tensor
    kind: str = field(default="slstm", metadata={"static": True})


def init_stack(config: BlockStackConfig, rng: np.random.Generator) -> list[BlockParams]:
    d, hid = config.embedding_dim, config.mlp_width
    blocks = []
    for kind in config.layers:
        if kind == "slstm":
            cell = init_slstm(d, d, config.n_heads, rng)
        elif kind == "mlstm":
            cell = init_mlstm(d, d, config.n_heads, rng)
        else:
            cell = init_lstm(d, d, rng)
        blocks.append(
            BlockParams(
                norm1_scale=Tensor(np.ones(d), requires_grad=True),
                norm1_shift=Tensor(np.zeros(d), requires_grad=True),
                cell=cell,
                norm2_scale=Tensor(np.ones(d), requires_grad=True),
                norm2_shift=Tensor(np.zeros(d), requires_grad=True),
                up_W=_uniform(rng, (hid, d), d),
                up_b=Tensor(np.zeros(hid), requires_grad=True),
                down_W=_uniform(rng, (d, hid), hid),
                down_b=Tensor(np.zeros(d), requires_grad=True),
                kind=kind,
            )
        )
    return blocks


def zero_states(config: BlockStackConfig, batch: int = 1) -> list[CellState]:
    """Fresh all-zero recurrent state for every layer."""
    d = config.embedding_dim
    states: list[CellState] = []
    for kind in config.layers:
        if kind == "slstm":
            states.append(SLstmState.zeros(batch, d))
        elif kind == "mlstm":
            states.append(MLstmState.zeros(batch, d, config.n_heads))
        else:
            states.append(LstmState.zeros(batch, d))
    return states


def _cell_step(kind: str, params: CellParams, state: CellState, x: Tensor):
    if kind == "slstm":
        return slstm_step(params, state, x)
    if kind == "mlstm":
        return mlstm_step(params, state, x)
    return lstm_step(params, state, x)


def stack_step(
    config: BlockStackConfig,
    params: Sequence[BlockParams],
    states: Sequence[CellState],
    x: Tensor,
) -> tuple[Tensor, list[CellState]]:
    """Advance every block by one step. Input states are left untouched."""
    if len(params) != len(config.layers) or len(states) != len(config.layers):
        raise ContractError(
            f"stack has {len(config.layers)} layers but got {len(params)} param sets and {len(states)} states"
        )
    if x.ndim != 2 or x.shape[1] != config.embedding_dim:
        raise DimensionError(f"stack input must be (B, {config.embedding_dim}), got {x.shape}")
    eps = config.layernorm_eps
    new_states: list[CellState] = []
    for block, state in zip(params, states):
        h, new_state = _cell_step(block.kind, block.cell, state, layernorm(x, block.norm1_scale, block.norm1_shift, eps))
        u = x + h
        mlp = linear(gelu(linear(layernorm(u, block.norm2_scale, block.norm2_shift, eps), block.up_W, block.up_b)),
                     block.down_W, block.down_b)
        x = u + mlp
        new_states.append(new_state)
    return x, new_states
