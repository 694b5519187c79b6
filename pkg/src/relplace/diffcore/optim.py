"""SGD and Adam parameter updates."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .tensor import MissingGradientError, Parameter, check_unique_names


class SGD:
    """p <- p - lr * g."""

    def __init__(self, params: Sequence[Parameter], lr: float):
        self.params = list(params)
        check_unique_names(self.params)
        self.lr = lr

    def step(self) -> None:
        for p in self.params:
            if p.grad is None:
                raise MissingGradientError(p.name)
            p.data -= (self.lr * p.grad).astype(p.data.dtype, copy=False)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


class Adam:
    """Bias-corrected first/second moment update (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, params: Sequence[Parameter], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        check_unique_names(self.params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {p.name: np.zeros_like(p.data) for p in self.params}
        self.v = {p.name: np.zeros_like(p.data) for p in self.params}

    def step(self) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p in self.params:
            if p.grad is None:
                raise MissingGradientError(p.name)
            g = p.grad
            m = self.m[p.name]
            v = self.v[p.name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
            p.data -= update.astype(p.data.dtype, copy=False)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


def make_optimizer(params: Sequence[Parameter], kind: str, lr: float):
    if kind == "sgd":
        return SGD(params, lr)
    if kind == "adam":
        return Adam(params, lr)
    raise ValueError(f"unknown optimizer kind '{kind}'")


def optimizer_step(params: Iterable[Parameter], kind: str, lr: float, state=None):
    """One update on a parameter collection; returns the advanced state.

    Functional wrapper over SGD/Adam for callers that hold state explicitly.
    """
    params = list(params)
    if state is None:
        state = make_optimizer(params, kind, lr)
    state.lr = lr
    state.step()
    return state
