"""Walk nested dataclasses of tensors by qualified name."""

from __future__ import annotations

import dataclasses
from typing import Iterator, Mapping

import numpy as np

from .errors import CheckpointError
from .numerics import Tensor


def named_parameters(tree, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
    """Yield ``(dotted.name, tensor)`` for every Tensor in a dataclass tree.

    Lists and tuples contribute their index as a name component.
    """
    if isinstance(tree, Tensor):
        yield prefix, tree
    elif dataclasses.is_dataclass(tree):
        for f in dataclasses.fields(tree):
            child = getattr(tree, f.name)
            yield from named_parameters(child, f"{prefix}.{f.name}" if prefix else f.name)
    elif isinstance(tree, (list, tuple)):
        for i, child in enumerate(tree):
            yield from named_parameters(child, f"{prefix}.{i}" if prefix else str(i))


def parameters(tree) -> list[Tensor]:
    return [t for _, t in named_parameters(tree)]


def state_dict(tree) -> dict[str, np.ndarray]:
    return {name: t.data.copy() for name, t in named_parameters(tree)}


def load_state_dict(tree, arrays: Mapping[str, np.ndarray]) -> None:
    """Copy arrays into the tree's tensors; names and shapes must match exactly."""
    named = dict(named_parameters(tree))
    missing = sorted(set(named) - set(arrays))
    extra = sorted(set(arrays) - set(named))
    if missing or extra:
        raise CheckpointError(f"parameter names differ: missing={missing[:5]} unexpected={extra[:5]}")
    for name, t in named.items():
        arr = np.asarray(arrays[name], dtype=np.float64)
        if arr.shape != t.shape:
            raise CheckpointError(f"{name}: shape {arr.shape} does not match model {t.shape}")
        t.data = arr.copy()
