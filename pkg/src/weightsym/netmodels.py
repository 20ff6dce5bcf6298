"""Parameter spaces of the small networks we act on, and their forward maps.

Three architectures are modelled: ReLU feedforward nets, 1-D valid
convolutions, and multihead attention blocks with an optional ReLU
feedforward.  Forward evaluation is plain numpy; the training paths that
need gradients rebuild these maps on Tensors where required.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .tensor import Array, ShapeError

SCHEMA_VERSION = "weightsym/1"


class SchemaError(ValueError):
    """Version mismatch or malformed serialized document."""


def _f64(a) -> Array:
    return np.array(a, dtype=np.float64)


@dataclass
class MlpParams:
    """Weights/biases of a ReLU feedforward net; layer i maps n_{i-1} -> n_i."""

    weights: list[Array]
    biases: list[Array]

    def __post_init__(self):
        if not self.weights or len(self.weights) != len(self.biases):
            raise ShapeError("need matching non-empty weight/bias lists")
        self.weights = [_f64(w) for w in self.weights]
        self.biases = [_f64(b) for b in self.biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ShapeError(f"layer {i}: bad shapes {w.shape}, {b.shape}")
            if i > 0 and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ShapeError(f"layer {i}: dimension chain broken")

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])


@dataclass
class Conv1dParams:
    """1-D conv stack; filter i has shape n_i x n_{i-1} x w_i."""

    filters: list[Array]
    biases: list[Array]

    def __post_init__(self):
        if not self.filters or len(self.filters) != len(self.biases):
            raise ShapeError("need matching non-empty filter/bias lists")
        self.filters = [_f64(w) for w in self.filters]
        self.biases = [_f64(b) for b in self.biases]
        for i, (w, b) in enumerate(zip(self.filters, self.biases)):
            if w.ndim != 3 or w.shape[2] < 1 or w.shape[0] != b.shape[0]:
                raise ShapeError(f"layer {i}: bad filter shape {w.shape}")
            if i > 0 and w.shape[1] != self.filters[i - 1].shape[0]:
                raise ShapeError(f"layer {i}: channel chain broken")

    @property
    def dims(self) -> list[int]:
        return [self.filters[0].shape[1]] + [w.shape[0] for w in self.filters]

    @property
    def n_layers(self) -> int:
        return len(self.filters)

    def copy(self) -> "Conv1dParams":
        return Conv1dParams([w.copy() for w in self.filters],
                            [b.copy() for b in self.biases])


@dataclass
class MhaBlockParams:
    """Multihead attention parameters; each projection is d x d_h per head."""

    wq: list[Array]
    wk: list[Array]
    wv: list[Array]
    wo: list[Array]
    ff: Optional[tuple[Array, Array, Array, Array]] = None  # (W_A, b_A, W_B, b_B)

    def __post_init__(self):
        h = len(self.wq)
        if h < 1 or any(len(lst) != h for lst in (self.wk, self.wv, self.wo)):
            raise ShapeError("all four projection lists need equal length >= 1")
        for role in ("wq", "wk", "wv", "wo"):
            setattr(self, role, [_f64(w) for w in getattr(self, role)])
        shape = self.wq[0].shape
        for role in ("wq", "wk", "wv", "wo"):
            for w in getattr(self, role):
                if w.shape != shape:
                    raise ShapeError("projection shapes disagree")
        if self.ff is not None:
            w_a, b_a, w_b, b_b = (_f64(t) for t in self.ff)
            d = shape[0]
            if w_a.shape[1] != d or w_b.shape[0] != d or \
                    w_a.shape[0] != w_b.shape[1] or \
                    b_a.shape != (w_a.shape[0],) or b_b.shape != (d,):
                raise ShapeError("feedforward shapes inconsistent with d")
            self.ff = (w_a, b_a, w_b, b_b)

    @property
    def heads(self) -> int:
        return len(self.wq)

    @property
    def d(self) -> int:
        return self.wq[0].shape[0]

    @property
    def d_head(self) -> int:
        return self.wq[0].shape[1]

    def copy(self) -> "MhaBlockParams":
        ff = None if self.ff is None else tuple(t.copy() for t in self.ff)
        return MhaBlockParams([w.copy() for w in self.wq],
                              [w.copy() for w in self.wk],
                              [w.copy() for w in self.wv],
                              [w.copy() for w in self.wo], ff)


Params = MlpParams | Conv1dParams | MhaBlockParams


# -- forward evaluation -------------------------------------------------

def mlp_forward(params: MlpParams, x: Array) -> Array:
    """Alternate affine maps and ReLU; no activation after the last layer.

    `x` may be a single input (n0,) or a batch (B, n0).
    """
    x = _f64(x)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != params.dims[0]:
        raise ShapeError(f"input dim {h.shape[1]} != {params.dims[0]}")
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if i < params.n_layers - 1:
            h = np.maximum(h, 0.0)
    return h[0] if single else h


def conv1d_forward(params: Conv1dParams, x: Array) -> Array:
    """Valid cross-correlation stack with bias and inter-layer ReLU.

    `x` has shape (n0, T); output (nL, T').
    """
    h = _f64(x)
    if h.ndim != 2 or h.shape[0] != params.dims[0]:
        raise ShapeError("input must be (channels, length) with matching channels")
    for i, (w, b) in enumerate(zip(params.filters, params.biases)):
        n_out, n_in, win = w.shape
        t_out = h.shape[1] - win + 1
        if t_out < 1:
            raise ShapeError(f"layer {i}: sequence shorter than window {win}")
        # windows: (n_in, t_out, win)
        windows = np.lib.stride_tricks.sliding_window_view(h, win, axis=1)
        h = np.einsum("oiw,itw->ot", w, windows) + b[:, None]
        if i < params.n_layers - 1:
            h = np.maximum(h, 0.0)
    return h


def mha_forward(params: MhaBlockParams, x: Array,
                temperature: bool = False) -> Array:
    """Sum over heads of softmax((xWq)(xWk)^T)(xWv)Wo^T, then optional FF.

    The 1/sqrt(d_h) temperature is off by default; the symmetry analysis
    is unaffected either way.
    """
    x = _f64(x)
    if x.ndim != 2 or x.shape[1] != params.d:
        raise ShapeError(f"token dim {x.shape} != d={params.d}")
    scale = 1.0 / np.sqrt(params.d_head) if temperature else 1.0
    out = np.zeros_like(x)
    for wq, wk, wv, wo in zip(params.wq, params.wk, params.wv, params.wo):
        scores = (x @ wq) @ (x @ wk).T * scale
        scores = scores - scores.max(axis=1, keepdims=True)
        e = np.exp(scores)
        attn = e / e.sum(axis=1, keepdims=True)
        out = out + attn @ (x @ wv) @ wo.T
    if params.ff is not None:
        w_a, b_a, w_b, b_b = params.ff
        out = np.maximum(out @ w_a.T + b_a, 0.0) @ w_b.T + b_b
    return out


def forward(params: Params, x: Array) -> Array:
    if isinstance(params, MlpParams):
        return mlp_forward(params, x)
    if isinstance(params, Conv1dParams):
        return conv1d_forward(params, x)
    if isinstance(params, MhaBlockParams):
        return mha_forward(params, x)
    raise TypeError(f"unknown parameter type {type(params)}")


# -- serialization ------------------------------------------------------

def _tensor_doc(a: Array) -> dict:
    return {"shape": list(a.shape), "data": a.reshape(-1).tolist()}


def _tensor_from_doc(doc: dict) -> Array:
    try:
        shape = tuple(int(s) for s in doc["shape"])
        data = np.array(doc["data"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed tensor entry: {exc}") from None
    expected = int(np.prod(shape)) if shape else 1
    if data.size != expected:
        raise SchemaError("tensor data length disagrees with shape")
    return data.reshape(shape)


def params_to_doc(params: Params) -> dict:
    tensors: dict[str, dict] = {}
    if isinstance(params, MlpParams):
        arch, dims = "mlp", params.dims
        for i, (w, b) in enumerate(zip(params.weights, params.biases)):
            tensors[f"w{i}"] = _tensor_doc(w)
            tensors[f"b{i}"] = _tensor_doc(b)
    elif isinstance(params, Conv1dParams):
        arch, dims = "conv1d", params.dims
        for i, (w, b) in enumerate(zip(params.filters, params.biases)):
            tensors[f"w{i}"] = _tensor_doc(w)
            tensors[f"b{i}"] = _tensor_doc(b)
    elif isinstance(params, MhaBlockParams):
        arch = "mha"
        dims = [params.d, params.d_head, params.heads]
        for role in ("wq", "wk", "wv", "wo"):
            for i, w in enumerate(getattr(params, role)):
                tensors[f"{role}{i}"] = _tensor_doc(w)
        if params.ff is not None:
            for name, t in zip(("ff_wa", "ff_ba", "ff_wb", "ff_bb"), params.ff):
                tensors[name] = _tensor_doc(t)
    else:
        raise TypeError(f"unknown parameter type {type(params)}")
    return {"version": SCHEMA_VERSION, "arch": arch, "dims": dims,
            "tensors": tensors}


def params_from_doc(doc: dict) -> Params:
    if not isinstance(doc, dict) or doc.get("version") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema version: {doc.get('version')!r}"
                          if isinstance(doc, dict) else "document is not an object")
    try:
        arch = doc["arch"]
        tensors = doc["tensors"]
    except KeyError as exc:
        raise SchemaError(f"missing field {exc}") from None
    get = lambda name: _tensor_from_doc(tensors[name])
    try:
        if arch in ("mlp", "conv1d"):
            n = len(tensors) // 2
            ws = [get(f"w{i}") for i in range(n)]
            bs = [get(f"b{i}") for i in range(n)]
            return MlpParams(ws, bs) if arch == "mlp" else Conv1dParams(ws, bs)
        if arch == "mha":
            h = int(doc["dims"][2])
            lists = {role: [get(f"{role}{i}") for i in range(h)]
                     for role in ("wq", "wk", "wv", "wo")}
            ff = None
            if "ff_wa" in tensors:
                ff = tuple(get(n) for n in ("ff_wa", "ff_ba", "ff_wb", "ff_bb"))
            return MhaBlockParams(ff=ff, **lists)
    except (KeyError, IndexError) as exc:
        raise SchemaError(f"malformed document: {exc}") from None
    raise SchemaError(f"unknown arch {arch!r}")


def serialize(params: Params) -> bytes:
    """Canonical JSON bytes; float64 round-trips bit-exactly via repr."""
    return json.dumps(params_to_doc(params), sort_keys=True,
                      separators=(",", ":")).encode()


def deserialize(blob: bytes) -> Params:
    try:
        doc = json.loads(blob.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"malformed document: {exc}") from None
    return params_from_doc(doc)
