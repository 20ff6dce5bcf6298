"""Strictly equivariant backbone layers and invariant read-outs.

WeightFeature carries a channel axis on top of each layer's weight/bias
shape; the monomial group acts on the neuron axes per channel.  Channel
mixing and entrywise ReLU commute with that action, and the pooling
read-outs quotient it entirely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netmodels import Conv1dParams, MhaBlockParams, MlpParams
from .symmetry import MonomialElement, _layer_perm_diag
from .tensor import (ShapeError, Tensor, as_tensor, bmm, concat, constant,
                     matmul, permute_axis, relu, sqrt)


@dataclass
class WeightFeature:
    """Channelized copy of an MLP/conv parameter point.

    weights[i] has shape (c, n_i, n_{i-1}) or (c, n_i, n_{i-1}, w);
    biases[i] has shape (c, n_i).
    """

    dims: list[int]
    weights: list[Tensor]
    biases: list[Tensor]

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ShapeError("need one bias feature per weight feature")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape[0] != b.shape[0] or w.shape[1] != b.shape[1] \
                    or w.shape[1] != self.dims[i + 1] \
                    or w.shape[2] != self.dims[i]:
                raise ShapeError(
                    f"layer {i}: weight {w.shape} / bias {b.shape} "
                    f"inconsistent with dims {self.dims}")

    @property
    def channels(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_layers(self) -> int:
        return len(self.weights)


@dataclass
class MhaInvariantFeature:
    """GL-invariant head coordinates: A_i = Wq_i Wk_i^T, B_i = Wv_i Wo_i^T."""

    a: list[Tensor]
    b: list[Tensor]


def lift(params: MlpParams | Conv1dParams) -> WeightFeature:
    """Copy parameters into channel 0 of a one-channel feature."""
    ws = params.filters if isinstance(params, Conv1dParams) else params.weights
    return WeightFeature(params.dims,
                         [Tensor(w[None]) for w in ws],
                         [Tensor(b[None]) for b in params.biases])


def channel_mix(mix: Tensor, feat: WeightFeature,
                bias: Tensor | None = None) -> WeightFeature:
    """Contract the channel axis with `mix`; optional bias on bias-features.

    A bias on weight-features would break scale equivariance outright; a
    bias on bias-features still breaks it (biases scale under the group),
    so equivariant stacks leave `bias` unset.
    """
    mix = as_tensor(mix)
    if mix.ndim != 2 or mix.shape[1] != feat.channels:
        raise ShapeError(f"mix shape {mix.shape} does not match "
                         f"{feat.channels} channels")
    new_w, new_b = [], []
    for w, b in zip(feat.weights, feat.biases):
        rest = w.shape[1:]
        wm = matmul(mix, w.reshape(w.shape[0], -1)).reshape((mix.shape[0],) + rest)
        bm = matmul(mix, b)
        if bias is not None:
            bm = bm + as_tensor(bias).reshape(-1, 1)
        new_w.append(wm)
        new_b.append(bm)
    return WeightFeature(feat.dims, new_w, new_b)


def equiv_relu(feat: WeightFeature) -> WeightFeature:
    return WeightFeature(feat.dims, [relu(w) for w in feat.weights],
                         [relu(b) for b in feat.biases])


def monomial_act_feature(g: MonomialElement, feat: WeightFeature) -> WeightFeature:
    """Group action on features: the raw-weight action applied per channel."""
    if g.dims != feat.dims:
        raise ShapeError("group dims do not match feature dims")
    new_w, new_b = [], []
    for i, (w, b) in enumerate(zip(feat.weights, feat.biases), start=1):
        p_out, d_out = _layer_perm_diag(g, i)
        p_in, d_in = _layer_perm_diag(g, i - 1)
        wt = permute_axis(permute_axis(w, p_out, 1), p_in, 2)
        shape_out = (1, -1) + (1,) * (w.ndim - 2)
        shape_in = (1, 1, -1) + (1,) * (w.ndim - 3)
        wt = wt * Tensor(d_out.reshape(shape_out)) / Tensor(d_in.reshape(shape_in))
        bt = permute_axis(b, p_out, 1) * Tensor(d_out[None, :])
        new_w.append(wt)
        new_b.append(bt)
    return WeightFeature(feat.dims, new_w, new_b)


def _as_spatial_sum(w: Tensor) -> Tensor:
    """Reduce a conv filter to its total (spatially summed) response.

    The spatial axis is inert under the group, so the sum transforms
    exactly like a dense layer matrix and chain products stay valid.
    """
    if w.ndim == 3:
        return w
    return w.sum(axis=3)


def _safe_normalize(a: Tensor, axis: int) -> Tensor:
    """Divide by the Euclidean norm along `axis`; all-zero slices stay zero.

    The guard adds 1 only where the norm is exactly zero, so nonzero
    slices are divided by their true norm and the result is exactly
    invariant under positive rescaling of the slice.
    """
    s = (a * a).sum(axis=axis, keepdims=True)
    guard = constant((s.data == 0.0).astype(np.float64))
    return a / sqrt(s + guard)


def invariant_pool(feat: WeightFeature) -> Tensor:
    """Monomial-invariant read-out, one flat vector per feature.

    First layer: append the bias as a column, normalize each hidden row,
    average over the hidden axis (the row norm absorbs the scale, the
    average absorbs the permutation).  Last layer: the mirror image on
    columns; its bias is untouched by the group and passes through raw.
    Intermediate layers are scaled on both sides, which no single-axis
    normalization can quotient; instead we use chain products, where the
    hidden diagonals cancel telescopically: the prefix product
    W_i ... W_1 is only row-scaled and the suffix product W_L ... W_i is
    only column-scaled, so the same normalize-and-average applies.  The
    full chain W_L ... W_1 and the bias accumulator of the composed
    affine map are exactly invariant and enter unnormalized.
    """
    n_l = feat.n_layers
    mats = [_as_spatial_sum(w) for w in feat.weights]
    parts: list[Tensor] = []
    if n_l == 1:
        # no hidden neurons: everything is already invariant
        parts.append(feat.weights[0].reshape(-1))
        parts.append(feat.biases[0].reshape(-1))
        return concat(parts)

    c = feat.channels
    w1, b1 = mats[0], feat.biases[0]
    a = concat([w1, b1.reshape(c, -1, 1)], axis=2)
    parts.append(_safe_normalize(a, 2).mean(axis=1).reshape(-1))

    prefix = mats[0]
    vbias = feat.biases[0].reshape(c, -1, 1)
    for i in range(1, n_l):
        vbias = bmm(mats[i], vbias) + feat.biases[i].reshape(c, -1, 1)
        prefix = bmm(mats[i], prefix)
        if i < n_l - 1:
            # rows indexed by hidden neurons of layer i+1
            parts.append(_safe_normalize(prefix, 2).mean(axis=1).reshape(-1))
    suffix = mats[-1]
    parts.append(_safe_normalize(suffix, 1).mean(axis=2).reshape(-1))
    for i in range(n_l - 2, 0, -1):
        suffix = bmm(suffix, mats[i])
        # columns indexed by hidden neurons of layer i
        parts.append(_safe_normalize(suffix, 1).mean(axis=2).reshape(-1))

    parts.append(feat.biases[-1].reshape(-1))
    parts.append(prefix.reshape(-1))
    parts.append(vbias.reshape(-1))
    return concat(parts)


def mha_invariants(params: MhaBlockParams | dict) -> MhaInvariantFeature:
    """Exact head products; accepts raw parameters or a dict of Tensor lists."""
    if isinstance(params, MhaBlockParams):
        wq = [Tensor(w) for w in params.wq]
        wk = [Tensor(w) for w in params.wk]
        wv = [Tensor(w) for w in params.wv]
        wo = [Tensor(w) for w in params.wo]
    else:
        wq, wk, wv, wo = params["wq"], params["wk"], params["wv"], params["wo"]
    a = [matmul(q, k.T) for q, k in zip(wq, wk)]
    b = [matmul(v, o.T) for v, o in zip(wv, wo)]
    return MhaInvariantFeature(a, b)


def head_pool(inv: MhaInvariantFeature, mode: str = "sum") -> Tensor:
    """Symmetric pooling over heads of the flattened invariant products."""
    if mode not in ("sum", "mean"):
        raise ValueError(f"unknown pooling mode {mode!r}")
    h = len(inv.a)
    a_sum = inv.a[0]
    b_sum = inv.b[0]
    for i in range(1, h):
        a_sum = a_sum + inv.a[i]
        b_sum = b_sum + inv.b[i]
    if mode == "mean":
        a_sum = a_sum * (1.0 / h)
        b_sum = b_sum * (1.0 / h)
    return concat([a_sum.reshape(-1), b_sum.reshape(-1)])
