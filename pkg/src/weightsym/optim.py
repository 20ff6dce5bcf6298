"""Adam optimizer, training losses, and the finite-difference gradient check."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Array, NumericError, ShapeError, Tensor, as_tensor, clip, log


@dataclass
class AdamState:
    """Per-parameter moment buffers plus hyperparameters."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[Array] = field(default_factory=list)
    v: list[Array] = field(default_factory=list)

    def init(self, params: Sequence[Tensor]) -> "AdamState":
        self.m = [np.zeros(p.shape) for p in params]
        self.v = [np.zeros(p.shape) for p in params]
        return self


def adam_step(state: AdamState, params: Sequence[Tensor],
              grads: Sequence[Array]) -> None:
    """One bias-corrected Adam update, writing new values into each leaf."""
    if not state.m:
        state.init(params)
    if len(params) != len(grads):
        raise ShapeError("params/grads length mismatch")
    state.step += 1
    t = state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} != param shape {p.shape}")
        state.m[i] = state.beta1 * state.m[i] + (1 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1 - state.beta2) * g * g
        mhat = state.m[i] / (1 - state.beta1 ** t)
        vhat = state.v[i] / (1 - state.beta2 ** t)
        new = np.array(p.data - state.lr * mhat / (np.sqrt(vhat) + state.eps))
        new.flags.writeable = False
        p.data = new


def bce_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean binary cross-entropy; predictions clamped to [1e-7, 1-1e-7]."""
    pred = clip(as_tensor(pred), 1e-7, 1.0 - 1e-7)
    target = as_tensor(target)
    return -(target * log(pred) + (1.0 - target) * log(1.0 - pred)).mean()


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    pred, target = as_tensor(pred), as_tensor(target)
    return ((pred - target) ** 2).mean()


def grad_check(fn: Callable[[Tensor], Tensor], point: Array,
               step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    `fn` must map a flat parameter tensor to a scalar Tensor and be smooth
    near `point` (the caller steers clear of ReLU kinks and quantile ties).
    """
    point = np.asarray(point, dtype=np.float64).reshape(-1)
    leaf = Tensor(point, requires_grad=True)
    out = fn(leaf)
    out.backward()
    if leaf.grad is None:
        analytic = np.zeros_like(point)
    else:
        analytic = np.asarray(leaf.grad, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(analytic)):
        raise NumericError("non-finite analytic gradient")
    worst = 0.0
    for i in range(point.size):
        hi = point.copy()
        hi[i] += step
        lo = point.copy()
        lo[i] -= step
        numeric = (fn(Tensor(hi)).item() - fn(Tensor(lo)).item()) / (2 * step)
        err = abs(analytic[i] - numeric) / (abs(analytic[i]) + abs(numeric) + 1e-12)
        worst = max(worst, err)
    return worst
