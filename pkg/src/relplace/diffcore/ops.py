"""Differentiable operations on Tensors.

Each op computes its forward result eagerly in numpy and, when a tape is
active and some input requires a gradient, records a closure that maps the
output gradient to per-input gradient contributions. Conv and linear layers
funnel through BLAS GEMMs via im2col; everything else is plain vectorized
numpy.

Convolution is cross-correlation (no kernel flip). Reductions use numpy's
deterministic pairwise summation, so identical inputs give identical results.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import (
    DimensionError,
    Tensor,
    active_tape,
    check_finite,
)

CE_EPS = 1e-12


def _result(op: str, data: np.ndarray, inputs: Sequence[Tensor], backward_fn) -> Tensor:
    data = np.asarray(data)
    out = Tensor(check_finite(op, data), requires_grad=any(t.requires_grad for t in inputs),
                 dtype=data.dtype)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        tape.record(out, backward_fn)
    return out


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of (N,C,H,W) with (F,C,kh,kw) kernels plus bias (F,)."""
    if x.data.ndim != 4:
        raise DimensionError("conv2d", "input rank", 4, x.data.ndim)
    if kernel.data.ndim != 4:
        raise DimensionError("conv2d", "kernel rank", 4, kernel.data.ndim)
    n, c, h, w = x.shape
    f, kc, kh, kw = kernel.shape
    if kc != c:
        raise DimensionError("conv2d", "channel", c, kc)
    if bias.shape != (f,):
        raise DimensionError("conv2d", "bias", (f,), bias.shape)
    if kh > h + 2 * padding:
        raise DimensionError("conv2d", "height", f"kernel height <= {h + 2 * padding}", kh)
    if kw > w + 2 * padding:
        raise DimensionError("conv2d", "width", f"kernel width <= {w + 2 * padding}", kw)

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    _, _, ho, wo, _, _ = win.shape
    # (N,Ho,Wo,C,kh,kw) -> GEMM rows
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * ho * wo, c * kh * kw)
    kflat = kernel.data.reshape(f, -1)
    out = (cols @ kflat.T).reshape(n, ho, wo, f).transpose(0, 3, 1, 2) + bias.data[:, None, None]

    def backward(g: np.ndarray):
        gcols = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(n * ho * wo, f)
        grads = []
        if kernel.requires_grad:
            grads.append((kernel, (gcols.T @ cols).reshape(kernel.shape)))
        if bias.requires_grad:
            grads.append((bias, g.sum(axis=(0, 2, 3))))
        if x.requires_grad:
            dwin = (gcols @ kflat).reshape(n, ho, wo, c, kh, kw)
            dxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    dxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += \
                        dwin[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            dx = dxp[:, :, padding:padding + h, padding:padding + w] if padding else dxp
            grads.append((x, dx))
        return grads

    return _result("conv2d", out, (x, kernel, bias), backward)


def pool_max(x: Tensor, window: int, stride: int) -> Tensor:
    """Max pooling over the trailing two axes; gradient goes to the first
    (row-major) maximum of each window."""
    if x.data.ndim < 2:
        raise DimensionError("pool_max", "input rank", ">=2", x.data.ndim)
    h, w = x.shape[-2], x.shape[-1]
    if window > h or window > w:
        raise DimensionError("pool_max", "window", f"<= ({h},{w})", window)
    lead = x.shape[:-2]
    xr = x.data.reshape((-1, h, w))
    win = sliding_window_view(xr, (window, window), axis=(1, 2))[:, ::stride, ::stride]
    b, ho, wo, _, _ = win.shape
    flat = win.reshape(b, ho, wo, window * window)
    arg = flat.argmax(axis=3)
    out = np.take_along_axis(flat, arg[..., None], axis=3)[..., 0]

    def backward(g: np.ndarray):
        gr = g.reshape(b, ho, wo)
        dx = np.zeros_like(xr)
        bi, ii, jj = np.meshgrid(np.arange(b), np.arange(ho), np.arange(wo), indexing="ij")
        rows = ii * stride + arg // window
        cols = jj * stride + arg % window
        np.add.at(dx, (bi, rows, cols), gr)
        return [(x, dx.reshape(x.shape))]

    return _result("pool_max", out.reshape(lead + (ho, wo)), (x,), backward)


def upsample2x(x: Tensor) -> Tensor:
    """Nearest-neighbor 2x upsampling of (N,C,H,W)."""
    if x.data.ndim != 4:
        raise DimensionError("upsample2x", "input rank", 4, x.data.ndim)
    n, c, h, w = x.shape
    out = x.data.repeat(2, axis=2).repeat(2, axis=3)

    def backward(g: np.ndarray):
        return [(x, g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)))]

    return _result("upsample2x", out, (x,), backward)


def activation(x: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation kind '{kind}'")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = np.where(mask, x.data, 0)

    def backward(g: np.ndarray):
        return [(x, g * mask)]

    return _result("relu", out, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    out = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                   np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d)))).astype(d.dtype)

    def backward(g: np.ndarray):
        return [(x, g * out * (1.0 - out))]

    return _result("sigmoid", out, (x,), backward)


def softmax(logits: Tensor) -> Tensor:
    """Softmax over the last axis, computed with max subtraction."""
    if logits.shape[-1] < 2:
        raise DimensionError("softmax", "classes", ">=2", logits.shape[-1])
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g: np.ndarray):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return [(logits, out * (g - dot))]

    return _result("softmax", out, (logits,), backward)


def cross_entropy(posterior: Tensor, onehot) -> Tensor:
    """-sum(onehot * ln(posterior + eps)); mean over any leading axes."""
    y = onehot.data if isinstance(onehot, Tensor) else np.asarray(onehot, dtype=posterior.data.dtype)
    if y.shape != posterior.shape:
        raise DimensionError("cross_entropy", "shape", posterior.shape, y.shape)
    n = max(1, int(np.prod(posterior.shape[:-1])))
    logp = np.log(posterior.data + CE_EPS)
    out = -(y * logp).sum() / n

    def backward(g: np.ndarray):
        return [(posterior, g * (-y / (posterior.data + CE_EPS)) / n)]

    return _result("cross_entropy", np.asarray(out), (posterior,), backward)


def mse(prediction: Tensor, target) -> Tensor:
    """Mean squared error; target is a constant (no gradient flows into it)."""
    t = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=prediction.data.dtype)
    if t.shape != prediction.shape:
        raise DimensionError("mse", "shape", prediction.shape, t.shape)
    diff = prediction.data - t
    n = diff.size
    out = (diff * diff).sum() / n

    def backward(g: np.ndarray):
        return [(prediction, g * 2.0 * diff / n)]

    return _result("mse", np.asarray(out), (prediction,), backward)


def weighted_sq_err_sum(prediction: Tensor, target, weights: Optional[np.ndarray] = None) -> Tensor:
    """sum_i w_i * ||prediction_i - target_i||^2 over rows (K, C).

    The workhorse of the placement loss: targets and weights are constants.
    """
    t = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=prediction.data.dtype)
    if t.shape != prediction.shape:
        raise DimensionError("weighted_sq_err_sum", "shape", prediction.shape, t.shape)
    diff = prediction.data - t
    if weights is None:
        w = None
        out = (diff * diff).sum()
    else:
        w = np.asarray(weights, dtype=prediction.data.dtype).reshape(-1, *([1] * (diff.ndim - 1)))
        out = (w * diff * diff).sum()

    def backward(g: np.ndarray):
        scale = 2.0 * diff if w is None else 2.0 * w * diff
        return [(prediction, g * scale)]

    return _result("weighted_sq_err_sum", np.asarray(out), (prediction,), backward)


def global_avg_pool(x: Tensor) -> Tensor:
    """(N,C,H,W) -> (N,C) spatial mean."""
    if x.data.ndim != 4:
        raise DimensionError("global_avg_pool", "input rank", 4, x.data.ndim)
    n, c, h, w = x.shape
    out = x.data.mean(axis=(2, 3))

    def backward(g: np.ndarray):
        return [(x, np.broadcast_to(g[:, :, None, None], x.shape) / (h * w))]

    return _result("global_avg_pool", out, (x,), backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """(N,K) @ (K,F) + (F,)."""
    if x.data.ndim != 2:
        raise DimensionError("linear", "input rank", 2, x.data.ndim)
    if weight.shape[0] != x.shape[1]:
        raise DimensionError("linear", "in_features", x.shape[1], weight.shape[0])
    if bias.shape != (weight.shape[1],):
        raise DimensionError("linear", "bias", (weight.shape[1],), bias.shape)
    out = x.data @ weight.data + bias.data

    def backward(g: np.ndarray):
        grads = []
        if weight.requires_grad:
            grads.append((weight, x.data.T @ g))
        if bias.requires_grad:
            grads.append((bias, g.sum(axis=0)))
        if x.requires_grad:
            grads.append((x, g @ weight.data.T))
        return grads

    return _result("linear", out, (x, weight, bias), backward)


def concat_channels(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate (N,C_i,H,W) tensors along the channel axis."""
    base = parts[0].shape
    for p in parts[1:]:
        if p.data.ndim != 4 or p.shape[0] != base[0] or p.shape[2:] != base[2:]:
            raise DimensionError("concat_channels", "spatial", base, p.shape)
    out = np.concatenate([p.data for p in parts], axis=1)
    splits = np.cumsum([p.shape[1] for p in parts])[:-1]

    def backward(g: np.ndarray):
        return list(zip(parts, np.split(g, splits, axis=1)))

    return _result("concat_channels", out, tuple(parts), backward)


def gather_pixels(x: Tensor, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """(C,H,W) gathered at K (row,col) locations -> (K,C)."""
    if x.data.ndim != 3:
        raise DimensionError("gather_pixels", "input rank", 3, x.data.ndim)
    c, h, w = x.shape
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if rows.size and (rows.min() < 0 or rows.max() >= h):
        raise DimensionError("gather_pixels", "row", f"0..{h - 1}", (int(rows.min()), int(rows.max())))
    if cols.size and (cols.min() < 0 or cols.max() >= w):
        raise DimensionError("gather_pixels", "col", f"0..{w - 1}", (int(cols.min()), int(cols.max())))
    out = x.data[:, rows, cols].T  # (K,C)
    flat_idx = rows * w + cols

    def backward(g: np.ndarray):
        dx = np.empty_like(x.data)
        flat = dx.reshape(c, h * w)
        for ch in range(c):
            flat[ch] = np.bincount(flat_idx, weights=g[:, ch], minlength=h * w)
        return [(x, dx)]

    return _result("gather_pixels", out, (x,), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError("add", "shape", a.shape, b.shape)
    out = a.data + b.data

    def backward(g: np.ndarray):
        return [(a, g), (b, g)]

    return _result("add", out, (a, b), backward)
