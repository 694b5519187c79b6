"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import NonFiniteError, Tape, Tensor


def grad_check(function: Callable[[Tensor], Tensor], point: Tensor, h: float = 1e-3) -> float:
    """Max relative error between the tape gradient and central differences.

    The reverse-mode gradient is taken at the point's own dtype (that is the
    thing under test). The central-difference oracle always evaluates the
    function at float64 so that f32 cancellation noise in (f(x+h)-f(x-h))
    cannot mask a gradient bug. Relative error per component uses denominator
    max(|a|, |b|, 1e-8). `function` must map a Tensor to a scalar Tensor and
    be evaluable in an h-neighborhood of `point`.
    """
    x = Tensor(point.data.copy(), requires_grad=True, dtype=point.data.dtype)
    with Tape() as tape:
        out = function(x)
    tape.backward(out)
    analytic = np.zeros_like(x.data, dtype=np.float64) if x.grad is None \
        else x.grad.astype(np.float64)

    x64 = Tensor(point.data.astype(np.float64), requires_grad=False, dtype=np.float64)
    numeric = np.zeros_like(analytic)
    flat = x64.data.reshape(-1)
    nflat = numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = _eval_scalar(function, x64)
        flat[i] = orig - h
        fm = _eval_scalar(function, x64)
        flat[i] = orig
        nflat[i] = (fp - fm) / (2.0 * h)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def _eval_scalar(function, x: Tensor) -> float:
    with Tape():
        val = float(function(x).data.reshape(()))
    if not np.isfinite(val):
        raise NonFiniteError("grad_check: function evaluated to a non-finite value")
    return val
