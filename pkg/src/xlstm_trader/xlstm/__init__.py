"""sLSTM / mLSTM / LSTM cells and the residual block stack."""

from .cells import (
    LstmParams,
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
from .stack import BlockParams, BlockStackConfig, init_stack, stack_step, zero_states

__all__ = [
    "BlockParams",
    "BlockStackConfig",
    "LstmParams",
    "LstmState",
    "MLstmParams",
    "MLstmState",
    "SLstmParams",
    "SLstmState",
    "init_lstm",
    "init_mlstm",
    "init_slstm",
    "init_stack",
    "lstm_step",
    "mlstm_step",
    "slstm_step",
    "stack_step",
    "zero_states",
]
