"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import ContractError
from .tensor import Tensor, backward, no_grad


def gradient_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5) -> float:
    """Max over coordinates of |analytic - numeric| / max(1, |analytic|).

    ``f`` must map ``x`` to a scalar tensor. ``x.data`` is restored on exit.
    """
    if not (0.0 < h <= 1e-3):
        raise ContractError(f"step h must be in (0, 1e-3], got {h}")
    x.requires_grad = True
    x.grad = None
    loss = f(x)
    if loss.size != 1:
        raise ContractError(f"f must return a scalar, got shape {loss.shape}")
    backward(loss, inputs=[x])
    analytic = x.grad.copy()
    base = x.data.copy()
    numeric = np.zeros_like(base)
    flat = numeric.reshape(-1)
    try:
        with no_grad():
            for i in range(base.size):
                probe = base.copy().reshape(-1)
                probe[i] += h
                x.data = probe.reshape(base.shape)
                up = f(x).item()
                probe[i] -= 2.0 * h
                x.data = probe.reshape(base.shape)
                down = f(x).item()
                flat[i] = (up - down) / (2.0 * h)
    finally:
        x.data = base
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic)), initial=0.0))
