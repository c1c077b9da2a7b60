"""Adam with bias correction, plus global gradient-norm clipping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ContractError
from .tensor import Tensor


@dataclass
class AdamState:
    alpha: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[Tensor], **hyper) -> "AdamState":
        return cls(
            first_moment=[np.zeros_like(p.data) for p in params],
            second_moment=[np.zeros_like(p.data) for p in params],
            **hyper,
        )


def adam_step(params: Sequence[Tensor], state: AdamState) -> None:
    """Apply one bias-corrected Adam update in place.

    Raises ContractError when a parameter has no gradient buffer or the
    moment buffers do not line up with the parameters.
    """
    if len(params) != len(state.first_moment) or len(params) != len(state.second_moment):
        raise ContractError("Adam state does not match the parameter list")
    for p, m in zip(params, state.first_moment):
        if p.grad is None:
            raise ContractError(f"parameter {p.name or p.shape} has no gradient")
        if m.shape != p.shape:
            raise ContractError(f"moment shape {m.shape} != parameter shape {p.shape}")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    for i, p in enumerate(params):
        g = p.grad
        m = b1 * state.first_moment[i] + (1.0 - b1) * g
        v = b2 * state.second_moment[i] + (1.0 - b2) * (g * g)
        state.first_moment[i] = m
        state.second_moment[i] = v
        update = state.alpha * (m / corr1) / (np.sqrt(v / corr2) + state.epsilon)
        p.data = p.data - update


def zero_grad(params: Sequence[Tensor]) -> None:
    for p in params:
        p.grad = np.zeros_like(p.data)


def clip_grad_norm(params: Sequence[Tensor], max_norm: float) -> float:
    """Rescale gradients so their global L2 norm is at most ``max_norm``.

    Returns the norm measured before clipping.
    """
    total = math.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params if p.grad is not None))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return total
