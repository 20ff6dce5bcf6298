"""Statistical weight features: mean, variance, and five quantiles per tensor.

These are the inputs to the group-valued scale/GL networks.  They are
permutation-invariant by construction, which is what lets the learned
group element ignore neuron ordering.  All outputs are Tensors so
gradients can flow when the features themselves are being trained
through (they are treated as functions of constant inputs otherwise).
"""

from __future__ import annotations

import numpy as np

from .netmodels import Conv1dParams, MhaBlockParams, MlpParams
from .tensor import ShapeError, Tensor, as_tensor, concat

QUANTILE_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)


def tensor_stats(t: Tensor) -> Tensor:
    """(mean, population variance, q0, q.25, q.5, q.75, q1) of the values.

    Quantiles interpolate linearly between order statistics at rank
    q*(n-1); the gradient flows to the one or two defining order
    statistics (first-index tie breaking via stable sort).
    """
    t = as_tensor(t)
    if t.size == 0:
        raise ShapeError("tensor_stats of empty tensor")
    flat = t.reshape(t.size)
    n = t.size
    mean = flat.mean()
    var = ((flat - mean) ** 2).mean()
    order = np.argsort(flat.data, kind="stable")
    parts = [mean.reshape(1), var.reshape(1)]
    for q in QUANTILE_LEVELS:
        rank = q * (n - 1)
        lo = int(np.floor(rank))
        hi = int(np.ceil(rank))
        frac = rank - lo
        if lo == hi:
            parts.append(flat.take_flat([order[lo]]))
        else:
            pair = flat.take_flat([order[lo], order[hi]])
            w = Tensor([1.0 - frac, frac])
            parts.append((pair * w).sum().reshape(1))
    return concat(parts)


def mlp_stat_features(params: MlpParams | Conv1dParams) -> Tensor:
    """Per layer: stats(weight) ++ stats(bias), in forward order (14 per layer)."""
    ws = params.filters if isinstance(params, Conv1dParams) else params.weights
    parts = []
    for w, b in zip(ws, params.biases):
        parts.append(tensor_stats(Tensor(w)))
        parts.append(tensor_stats(Tensor(b)))
    return concat(parts)


def mha_stat_features(params: MhaBlockParams) -> Tensor:
    """Stats of the 8 block tensors in order Wq, Wk, Wv, Wo, W_A, b_A, W_B, b_B.

    Head projections are stacked into one tensor per role before the
    stats, making the features invariant to head permutation.  Blocks
    without a feedforward yield 28 values instead of 56.
    """
    parts = []
    for role in ("wq", "wk", "wv", "wo"):
        stacked = np.stack(getattr(params, role))
        parts.append(tensor_stats(Tensor(stacked)))
    if params.ff is not None:
        for t in params.ff:
            parts.append(tensor_stats(Tensor(t)))
    return concat(parts)


def stat_dim(params) -> int:
    if isinstance(params, (MlpParams, Conv1dParams)):
        return 14 * params.n_layers
    return 56 if params.ff is not None else 28
