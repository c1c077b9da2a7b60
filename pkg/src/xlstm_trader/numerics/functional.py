"""Differentiable activations and linear-algebra helpers built on :mod:`.tensor`."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf, expit

from ..errors import ContractError, DimensionError, DomainError
from .tensor import (
    Tensor,
    _broadcast_shape,
    _unbroadcast,
    add,
    as_tensor,
    concat,
    matmul,
    mul,
    tmean,
    tsum,
)

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def exp(x) -> Tensor:
    x = as_tensor(x)
    with np.errstate(over="ignore"):
        out = np.exp(x.data)  # overflow surfaces as NonFiniteError below
    return Tensor._node(out, (x,), lambda g: (g * out,))


def log(x) -> Tensor:
    x = as_tensor(x)
    if np.any(x.data <= 0):
        raise DomainError("log of a non-positive value")
    return Tensor._node(np.log(x.data), (x,), lambda g: (g / x.data,))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return Tensor._node(out, (x,), lambda g: (g * (1.0 - out * out),))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = expit(x.data)
    return Tensor._node(out, (x,), lambda g: (g * out * (1.0 - out),))


def gelu(x) -> Tensor:
    """Exact GeLU, ``x * Phi(x)`` with the Gaussian CDF from erf."""
    x = as_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    out = x.data * cdf

    def bw(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * x.data * x.data)
        return (g * (cdf + x.data * pdf),)

    return Tensor._node(out, (x,), bw)


def softplus(x) -> Tensor:
    x = as_tensor(x)
    return Tensor._node(np.logaddexp(0.0, x.data), (x,), lambda g: (g * expit(x.data),))


def square(x) -> Tensor:
    x = as_tensor(x)
    return Tensor._node(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,))


def maximum(a, b) -> Tensor:
    """Elementwise max; on ties the gradient goes to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    pick_a = a.data >= b.data
    out = np.where(pick_a, a.data, b.data)
    return Tensor._node(
        out,
        (a, b),
        lambda g: (_unbroadcast(np.where(pick_a, g, 0.0), a.shape), _unbroadcast(np.where(pick_a, 0.0, g), b.shape)),
    )


def minimum(a, b) -> Tensor:
    """Elementwise min; on ties the gradient goes to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    pick_a = a.data <= b.data
    out = np.where(pick_a, a.data, b.data)
    return Tensor._node(
        out,
        (a, b),
        lambda g: (_unbroadcast(np.where(pick_a, g, 0.0), a.shape), _unbroadcast(np.where(pick_a, 0.0, g), b.shape)),
    )


def clamp(x, lo: float, hi: float) -> Tensor:
    """Clip into ``[lo, hi]``. Values sitting on a bound receive zero gradient."""
    if lo > hi:
        raise ContractError(f"clamp bounds reversed: {lo} > {hi}")
    x = as_tensor(x)
    inside = (x.data > lo) & (x.data < hi)
    return Tensor._node(np.clip(x.data, lo, hi), (x,), lambda g: (np.where(inside, g, 0.0),))


_ELEMENTWISE = {
    "exp": exp,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "gelu": gelu,
    "softplus": softplus,
}


def elementwise(kind: str, x, aux=None) -> Tensor:
    """Dispatch by name: exp, tanh, sigmoid, gelu, softplus, max_with, clamp.

    ``max_with`` takes the other operand as ``aux``; ``clamp`` takes a
    ``(lo, hi)`` pair.
    """
    if kind in _ELEMENTWISE:
        return _ELEMENTWISE[kind](x)
    if kind == "max_with":
        return maximum(x, aux)
    if kind == "clamp":
        lo, hi = aux
        return clamp(x, lo, hi)
    raise ContractError(f"unknown elementwise kind {kind!r}")


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def outer(u, v) -> Tensor:
    u, v = as_tensor(u), as_tensor(v)
    if u.ndim != 1 or v.ndim != 1:
        raise DimensionError(f"outer expects vectors, got {u.shape} and {v.shape}")
    return Tensor._node(
        np.outer(u.data, v.data),
        (u, v),
        lambda g: (g @ v.data, g.T @ u.data),
    )


def layernorm(x, scale, shift, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis then apply a learnable affine map."""
    x, scale, shift = as_tensor(x), as_tensor(scale), as_tensor(shift)
    width = x.shape[-1] if x.ndim else 0
    if width == 0:
        raise DomainError("layernorm over a zero-length axis")
    if scale.shape != (width,) or shift.shape != (width,):
        raise DimensionError(f"layernorm affine params must have shape ({width},)")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    if np.any(var + eps <= 0.0):
        raise DomainError("layernorm of a constant row with eps=0")
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    out = xhat * scale.data + shift.data

    def bw(g):
        gxhat = g * scale.data
        gx = rstd * (
            gxhat - gxhat.mean(axis=-1, keepdims=True) - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
        )
        lead = tuple(range(g.ndim - 1))
        return gx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return Tensor._node(out, (x, scale, shift), bw)


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight.T + bias`` with ``weight`` stored as (out, in)."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise DimensionError(f"linear: input {x.shape} does not match weight {weight.shape}")
    w = weight.data
    out = x.data @ w.T
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (w.shape[0],):
            raise DimensionError(f"linear: bias {bias.shape} does not match weight {w.shape}")
        out = out + bias.data
        return Tensor._node(out, (x, weight, bias), lambda g: (g @ w, g.T @ x.data, g.sum(axis=0)))
    return Tensor._node(out, (x, weight), lambda g: (g @ w, g.T @ x.data))


def linalg(kind: str, *operands, **kwargs) -> Tensor:
    """Dispatch by name: matmul, outer, add, mul, sum, mean, concat, layernorm."""
    if kind == "matmul":
        return matmul(*operands)
    if kind == "outer":
        return outer(*operands)
    if kind == "add":
        return add(*operands)
    if kind == "mul":
        return mul(*operands)
    if kind == "sum":
        return tsum(*operands, **kwargs)
    if kind == "mean":
        return tmean(*operands, **kwargs)
    if kind == "concat":
        parts = operands[0] if len(operands) == 1 and isinstance(operands[0], (list, tuple)) else operands
        return concat(parts, **kwargs)
    if kind == "layernorm":
        return layernorm(*operands, **kwargs)
    raise ContractError(f"unknown linalg kind {kind!r}")
