"""Weight-space symmetry groups and their actions.

Two group families: per-hidden-layer positive monomial matrices acting on
feedforward/conv parameters, and head-permutation x GL(d_h)^2h acting on
attention parameters.  A monomial matrix factors as diagonal times
permutation, so elements are stored as (perm, positive diagonal) pairs
and all actions are index/scale operations, exact for the identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netmodels import (Conv1dParams, MhaBlockParams, MlpParams, Params,
                        SchemaError, forward, SCHEMA_VERSION, _tensor_doc,
                        _tensor_from_doc)
from .tensor import Array, ShapeError

DET_FLOOR = 1e-10


class GroupError(ValueError):
    pass


def _check_perm(p: Array, n: int) -> Array:
    p = np.asarray(p, dtype=np.intp)
    if p.shape != (n,) or not np.array_equal(np.sort(p), np.arange(n)):
        raise GroupError(f"not a permutation of [{n}]")
    return p


@dataclass
class MonomialElement:
    """One (permutation, positive diagonal) pair per hidden layer.

    Acting on x, layer element g gives (g x)_j = diag[j] * x[perm[j]];
    boundary layers are fixed to the identity by convention.
    """

    dims: list[int]          # full layer widths n_0 .. n_L
    perms: list[Array]       # one per hidden layer, length n_i
    diags: list[Array]       # one per hidden layer, all entries > 0

    def __post_init__(self):
        hidden = self.dims[1:-1]
        if len(self.perms) != len(hidden) or len(self.diags) != len(hidden):
            raise GroupError("need one (perm, diag) per hidden layer")
        self.perms = [_check_perm(p, n) for p, n in zip(self.perms, hidden)]
        self.diags = [np.asarray(d, dtype=np.float64) for d in self.diags]
        for d, n in zip(self.diags, hidden):
            if d.shape != (n,) or np.any(d <= 0):
                raise GroupError("diagonal entries must be strictly positive")

    @property
    def n_hidden(self) -> int:
        return len(self.perms)

    def is_identity(self) -> bool:
        return all(np.array_equal(p, np.arange(p.size)) for p in self.perms) \
            and all(np.all(d == 1.0) for d in self.diags)


@dataclass
class GlMhaElement:
    """Head permutation plus an invertible (U_i, V_i) pair per head."""

    head_perm: Array         # sigma; head i of g.theta reads source head sigma[i]
    u: list[Array]
    v: list[Array]

    def __post_init__(self):
        h = len(self.u)
        self.head_perm = _check_perm(self.head_perm, h)
        if len(self.v) != h:
            raise GroupError("need U and V lists of equal length")
        self.u = [np.asarray(m, dtype=np.float64) for m in self.u]
        self.v = [np.asarray(m, dtype=np.float64) for m in self.v]
        for m in self.u + self.v:
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise GroupError("U/V must be square")
            if abs(np.linalg.det(m)) <= DET_FLOOR:
                raise GroupError("numerically singular U or V")

    @property
    def heads(self) -> int:
        return len(self.u)


GroupElement = MonomialElement | GlMhaElement


# -- monomial action ----------------------------------------------------

def _layer_perm_diag(g: MonomialElement, i: int) -> tuple[Array, Array]:
    """(perm, diag) of g_i with boundary convention g_0 = g_L = I."""
    if i == 0 or i == len(g.dims) - 1:
        n = g.dims[i]
        return np.arange(n), np.ones(n)
    return g.perms[i - 1], g.diags[i - 1]


def monomial_act(g: MonomialElement, params: MlpParams | Conv1dParams):
    """Apply W_i -> g_i W_i g_{i-1}^{-1}, b_i -> g_i b_i.

    Conv filters transform on their channel axes only; the spatial axis
    is inert.
    """
    is_conv = isinstance(params, Conv1dParams)
    if params.dims != g.dims:
        raise ShapeError(f"group dims {g.dims} != param dims {params.dims}")
    ws = params.filters if is_conv else params.weights
    new_w, new_b = [], []
    for i, (w, b) in enumerate(zip(ws, params.biases), start=1):
        p_out, d_out = _layer_perm_diag(g, i)
        p_in, d_in = _layer_perm_diag(g, i - 1)
        if is_conv:
            wt = w[p_out][:, p_in, :] * d_out[:, None, None] / d_in[None, :, None]
        else:
            wt = w[p_out][:, p_in] * d_out[:, None] / d_in[None, :]
        new_w.append(wt)
        new_b.append(b[p_out] * d_out)
    cls = Conv1dParams if is_conv else MlpParams
    return cls(new_w, new_b)


def gl_act(g: GlMhaElement, params: MhaBlockParams) -> MhaBlockParams:
    """Head i of g.theta is (Wq_s Ui^T, Wk_s Ui^-1, Wv_s Vi^T, Wo_s Vi^-1)
    with s = sigma(i); the feedforward submodule is untouched."""
    if g.heads != params.heads or g.u[0].shape[0] != params.d_head:
        raise ShapeError("head count or head dimension mismatch")
    s = g.head_perm
    wq = [params.wq[s[i]] @ g.u[i].T for i in range(g.heads)]
    wk = [params.wk[s[i]] @ np.linalg.inv(g.u[i]) for i in range(g.heads)]
    wv = [params.wv[s[i]] @ g.v[i].T for i in range(g.heads)]
    wo = [params.wo[s[i]] @ np.linalg.inv(g.v[i]) for i in range(g.heads)]
    ff = None if params.ff is None else tuple(t.copy() for t in params.ff)
    return MhaBlockParams(wq, wk, wv, wo, ff)


def act(g: GroupElement, params: Params) -> Params:
    if isinstance(g, MonomialElement):
        return monomial_act(g, params)
    return gl_act(g, params)


# -- group operations ---------------------------------------------------

def identity_monomial(dims: list[int]) -> MonomialElement:
    hidden = dims[1:-1]
    return MonomialElement(list(dims), [np.arange(n) for n in hidden],
                           [np.ones(n) for n in hidden])


def identity_gl(h: int, d_head: int) -> GlMhaElement:
    return GlMhaElement(np.arange(h), [np.eye(d_head) for _ in range(h)],
                        [np.eye(d_head) for _ in range(h)])


def compose(g1: GroupElement, g2: GroupElement) -> GroupElement:
    """Group product: act(compose(g1, g2), x) == act(g1, act(g2, x))."""
    if isinstance(g1, MonomialElement) and isinstance(g2, MonomialElement):
        if g1.dims != g2.dims:
            raise ShapeError("dimension mismatch in compose")
        perms, diags = [], []
        for p1, d1, p2, d2 in zip(g1.perms, g1.diags, g2.perms, g2.diags):
            # (D1 P1)(D2 P2) x : entry j is d1_j d2_{p1(j)} x_{p2(p1(j))}
            perms.append(p2[p1])
            diags.append(d1 * d2[p1])
        return MonomialElement(list(g1.dims), perms, diags)
    if isinstance(g1, GlMhaElement) and isinstance(g2, GlMhaElement):
        if g1.heads != g2.heads:
            raise ShapeError("head count mismatch in compose")
        s1, s2 = g1.head_perm, g2.head_perm
        u = [g1.u[i] @ g2.u[s1[i]] for i in range(g1.heads)]
        v = [g1.v[i] @ g2.v[s1[i]] for i in range(g1.heads)]
        return GlMhaElement(s2[s1], u, v)
    raise TypeError("cannot compose elements of different group families")


def inverse(g: GroupElement) -> GroupElement:
    if isinstance(g, MonomialElement):
        perms, diags = [], []
        for p, d in zip(g.perms, g.diags):
            pinv = np.argsort(p)
            perms.append(pinv)
            diags.append(1.0 / d[pinv])
        return MonomialElement(list(g.dims), perms, diags)
    sinv = np.argsort(g.head_perm)
    u = [np.linalg.inv(g.u[sinv[i]]) for i in range(g.heads)]
    v = [np.linalg.inv(g.v[sinv[i]]) for i in range(g.heads)]
    return GlMhaElement(sinv, u, v)


# -- sampling -----------------------------------------------------------

def sample_monomial(dims: list[int], scale_low: float = 1.0,
                    scale_high: float = 10.0, permute: bool = True,
                    rng: np.random.Generator | None = None) -> MonomialElement:
    """Diagonals i.i.d. uniform on [low, high]; optional uniform permutations."""
    if not (1 <= scale_low <= scale_high):
        raise ValueError("need 1 <= scale_low <= scale_high")
    rng = rng or np.random.default_rng()
    hidden = dims[1:-1]
    perms = [rng.permutation(n) if permute else np.arange(n) for n in hidden]
    diags = [rng.uniform(scale_low, scale_high, size=n) for n in hidden]
    return MonomialElement(list(dims), perms, diags)


def sample_gl(h: int, d_head: int, spread: float = 1.0,
              rng: np.random.Generator | None = None,
              permute: bool = True) -> GlMhaElement:
    """Entries uniform on [-spread, spread], resampled until invertible."""
    if spread <= 0:
        raise ValueError("spread must be positive")
    rng = rng or np.random.default_rng()

    def draw() -> Array:
        for _ in range(100):
            m = rng.uniform(-spread, spread, size=(d_head, d_head))
            if abs(np.linalg.det(m)) > DET_FLOOR:
                return m
        raise GroupError("could not sample an invertible matrix in 100 tries")

    perm = rng.permutation(h) if permute else np.arange(h)
    return GlMhaElement(perm, [draw() for _ in range(h)],
                        [draw() for _ in range(h)])


# -- oracles ------------------------------------------------------------

def _probe_inputs(params: Params, n_samples: int, input_scale: float,
                  rng: np.random.Generator) -> list[Array]:
    if isinstance(params, MlpParams):
        return [rng.standard_normal(params.dims[0]) * input_scale
                for _ in range(n_samples)]
    if isinstance(params, Conv1dParams):
        t_min = sum(w.shape[2] - 1 for w in params.filters) + 1
        return [rng.standard_normal((params.dims[0], t_min + 3)) * input_scale
                for _ in range(n_samples)]
    return [rng.standard_normal((5, params.d)) * input_scale
            for _ in range(n_samples)]


def check_functional_equiv(params_a: Params, params_b: Params,
                           n_samples: int = 100, input_scale: float = 1.0,
                           tol: float = 1e-8,
                           rng: np.random.Generator | None = None
                           ) -> tuple[bool, float]:
    """Sampled surrogate for functional equality: max |f_a(x) - f_b(x)|."""
    if type(params_a) is not type(params_b):
        raise ShapeError("architecture mismatch")
    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for x in _probe_inputs(params_a, n_samples, input_scale, rng):
        diff = np.max(np.abs(forward(params_a, x) - forward(params_b, x)))
        worst = max(worst, float(diff))
    return worst < tol, worst


def check_genericity(params: MhaBlockParams, rank_tol: float = 1e-8) -> bool:
    """Conditions under which the GL symmetry group captures equivalence:
    full-rank projections and pairwise-distinct head products Wq Wk^T."""
    for role in ("wq", "wk", "wv", "wo"):
        for w in getattr(params, role):
            sv = np.linalg.svd(w, compute_uv=False)
            if sv[-1] <= rank_tol * sv[0]:
                return False
    products = [wq @ wk.T for wq, wk in zip(params.wq, params.wk)]
    for i in range(len(products)):
        for j in range(i + 1, len(products)):
            if np.max(np.abs(products[i] - products[j])) <= rank_tol:
                return False
    return True


# -- serialization ------------------------------------------------------

def element_to_doc(g: GroupElement) -> dict:
    if isinstance(g, MonomialElement):
        tensors = {}
        for i, (p, d) in enumerate(zip(g.perms, g.diags)):
            tensors[f"perm{i}"] = {"shape": [int(p.size)],
                                   "data": [int(x) for x in p]}
            tensors[f"diag{i}"] = _tensor_doc(d)
        return {"version": SCHEMA_VERSION, "kind": "monomial",
                "dims": list(g.dims), "tensors": tensors}
    tensors = {"perm": {"shape": [g.heads],
                        "data": [int(x) for x in g.head_perm]}}
    for i in range(g.heads):
        tensors[f"u{i}"] = _tensor_doc(g.u[i])
        tensors[f"v{i}"] = _tensor_doc(g.v[i])
    return {"version": SCHEMA_VERSION, "kind": "gl_mha",
            "dims": [g.heads, g.u[0].shape[0]], "tensors": tensors}


def element_from_doc(doc: dict) -> GroupElement:
    if doc.get("version") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema version: {doc.get('version')!r}")
    kind = doc.get("kind")
    tensors = doc["tensors"]
    if kind == "monomial":
        dims = [int(d) for d in doc["dims"]]
        n_hidden = len(dims) - 2
        perms = [np.array(tensors[f"perm{i}"]["data"], dtype=np.intp)
                 for i in range(n_hidden)]
        diags = [_tensor_from_doc(tensors[f"diag{i}"]) for i in range(n_hidden)]
        return MonomialElement(dims, perms, diags)
    if kind == "gl_mha":
        h = int(doc["dims"][0])
        perm = np.array(tensors["perm"]["data"], dtype=np.intp)
        u = [_tensor_from_doc(tensors[f"u{i}"]) for i in range(h)]
        v = [_tensor_from_doc(tensors[f"v{i}"]) for i in range(h)]
        return GlMhaElement(perm, u, v)
    raise SchemaError(f"unknown group element kind {kind!r}")
