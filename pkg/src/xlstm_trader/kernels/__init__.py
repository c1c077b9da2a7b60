"""Fused recurrent-cell kernels with a compiled core and a numpy fallback.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``XLSTM_TRADER_PURE_PYTHON`` is set to a non-empty
value, the numpy implementation is selected. :func:`use_backend` switches
at runtime (tests and the benchmark exercise both).
"""

from __future__ import annotations

import contextlib
import os
from types import ModuleType

from . import _fallback

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS: dict[str, ModuleType] = {"python": _fallback}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

if os.environ.get("XLSTM_TRADER_PURE_PYTHON") or _ckernels is None:
    impl: ModuleType = _fallback
else:
    impl = _ckernels


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def backend_name() -> str:
    return "cython" if impl is _ckernels and _ckernels is not None else "python"


def set_backend(name: str) -> None:
    global impl
    if name not in _BACKENDS:
        raise ValueError(f"kernel backend {name!r} unavailable; have {available_backends()}")
    impl = _BACKENDS[name]


@contextlib.contextmanager
def use_backend(name: str):
    prev = backend_name()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)
