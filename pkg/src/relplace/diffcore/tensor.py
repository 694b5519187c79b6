"""Tensors, parameters and the gradient tape.

The compute core is deliberately tiny: dense numpy arrays, a handful of
operations (see ops.py) and a tape that replays recorded operations in exact
reverse execution order. Nothing here knows about networks or scenes.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

_DEFAULT_DTYPE = np.float32

# Toggled off only inside tight, already-verified loops; defaults to on so a
# NaN/Inf cannot propagate silently through an op.
_FINITE_CHECKS = True


class DimensionError(ValueError):
    """Shape mismatch, carrying the op and the offending axis."""

    def __init__(self, op: str, axis: str, expected, got):
        self.op = op
        self.axis = axis
        self.expected = expected
        self.got = got
        super().__init__(f"{op}: axis '{axis}' expected {expected}, got {got}")


class NonFiniteError(FloatingPointError):
    """An op produced NaN or Inf."""


class MissingGradientError(RuntimeError):
    """An optimizer step found a parameter without a populated gradient."""

    def __init__(self, name: str):
        self.parameter = name
        super().__init__(f"parameter '{name}' has no gradient; run backward first")


def default_dtype():
    return _DEFAULT_DTYPE


def set_default_dtype(dtype) -> None:
    """Set the global element type (np.float32 or np.float64)."""
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {dtype}; use float32 or float64")
    _DEFAULT_DTYPE = dtype


@contextlib.contextmanager
def use_dtype(dtype):
    """Temporarily switch the default element type (used by 64-bit grad checks)."""
    global _DEFAULT_DTYPE
    prev = _DEFAULT_DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        _DEFAULT_DTYPE = prev


def check_finite(op: str, arr: np.ndarray) -> np.ndarray:
    if _FINITE_CHECKS and not np.isfinite(arr).all():
        raise NonFiniteError(f"{op} produced a non-finite value")
    return arr


class Tensor:
    """Dense n-d array with an optional gradient buffer.

    `grad` is populated by Tape.backward; it always matches `data`'s shape.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.ascontiguousarray(data, dtype=dtype or _DEFAULT_DTYPE)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=False, dtype=self.data.dtype)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


class Parameter:
    """Named trainable tensor; names are unique within a collection."""

    __slots__ = ("name", "tensor")

    def __init__(self, name: str, data):
        self.name = name
        self.tensor = data if isinstance(data, Tensor) else Tensor(data)
        self.tensor.requires_grad = True

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @data.setter
    def data(self, value: np.ndarray) -> None:
        self.tensor.data = value

    @property
    def grad(self) -> Optional[np.ndarray]:
        return self.tensor.grad

    def zero_grad(self) -> None:
        self.tensor.zero_grad()

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.tensor.shape})"


def check_unique_names(params: Iterable[Parameter]) -> None:
    seen = set()
    for p in params:
        if p.name in seen:
            raise ValueError(f"duplicate parameter name '{p.name}'")
        seen.add(p.name)


class Tape:
    """Ordered record of executed differentiable ops.

    Ops append themselves during the forward pass; backward() replays the
    records in exact reverse execution order, accumulating gradients
    additively into each input tensor's grad buffer.
    """

    def __init__(self):
        self._records: list[tuple[Tensor, Callable[[np.ndarray], Sequence[tuple[Tensor, np.ndarray]]]]] = []
        self._prev: Optional[Tape] = None

    def record(self, output: Tensor, backward_fn) -> None:
        self._records.append((output, backward_fn))

    def __len__(self):
        return len(self._records)

    def __enter__(self) -> "Tape":
        global _ACTIVE_TAPE
        self._prev = _ACTIVE_TAPE
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc) -> None:
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = self._prev
        self._prev = None

    def backward(self, loss: Tensor) -> None:
        """Seed d(loss)/d(loss)=1 and walk the records in reverse."""
        if loss.data.size != 1:
            raise DimensionError("backward", "loss", "scalar", loss.data.shape)
        loss.grad = np.ones_like(loss.data)
        for out, backward_fn in reversed(self._records):
            if out.grad is None:
                continue
            for tgt, contribution in backward_fn(out.grad):
                if tgt.requires_grad:
                    tgt.accumulate_grad(check_finite("backward", contribution))


_ACTIVE_TAPE: Optional[Tape] = None


def active_tape() -> Optional[Tape]:
    return _ACTIVE_TAPE


@contextlib.contextmanager
def no_tape():
    """Run a block with recording disabled (pure inference)."""
    global _ACTIVE_TAPE
    prev = _ACTIVE_TAPE
    _ACTIVE_TAPE = None
    try:
        yield
    finally:
        _ACTIVE_TAPE = prev
