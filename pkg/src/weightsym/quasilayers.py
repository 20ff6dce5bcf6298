"""Group-valued maps learned from weight statistics, and F = alpha * beta.

The scale network emits one positive diagonal per hidden layer via
1 + eps*sin(mlp(stats)); the GL network emits per-head matrix pairs
I + eps*sin(reshape(mlp(stats))).  Keeping eps below 1/(2 d_h) makes the
GL outputs strictly diagonally dominant, so invertibility is guaranteed
rather than observed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .equivlayers import WeightFeature, monomial_act_feature
from .netmodels import MhaBlockParams, MlpParams
from .symmetry import GlMhaElement, MonomialElement, identity_monomial
from .tensor import (ShapeError, Tensor, as_tensor, clip, inv, matmul,
                     sigmoid, sin)

EPS_INIT = 0.01
# floor 0 (not a small positive) so a frozen eps gives exact equivariance
EPS_FLOOR = 0.0
SCALE_EPS_CAP = 0.5
HIDDEN_DIM = 32


def xavier(rng: np.random.Generator, n_out: int, n_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-bound, bound, size=(n_out, n_in))


@dataclass
class GatedPerceptron:
    """Two-layer perceptron with a sigmoid gate on the hidden layer."""

    w1: Tensor
    b1: Tensor
    wg: Tensor
    bg: Tensor
    w2: Tensor
    b2: Tensor

    @classmethod
    def init(cls, n_in: int, n_out: int, rng: np.random.Generator,
             hidden: int = HIDDEN_DIM) -> "GatedPerceptron":
        mk = lambda *s: Tensor(xavier(rng, *s), requires_grad=True)
        zero = lambda n: Tensor(np.zeros(n), requires_grad=True)
        return cls(mk(hidden, n_in), zero(hidden), mk(hidden, n_in),
                   zero(hidden), mk(n_out, hidden), zero(n_out))

    def __call__(self, x: Tensor) -> Tensor:
        x = as_tensor(x).reshape(1, -1)
        h = matmul(x, self.w1.T) + self.b1
        gate = sigmoid(matmul(x, self.wg.T) + self.bg)
        return (matmul(h * gate, self.w2.T) + self.b2).reshape(-1)

    def parameters(self) -> list[Tensor]:
        return [self.w1, self.b1, self.wg, self.bg, self.w2, self.b2]


@dataclass
class ScaleNet:
    """One gated perceptron and learnable eps per hidden layer of the target."""

    dims: list[int]
    nets: list[GatedPerceptron]
    eps: list[Tensor]

    @classmethod
    def init(cls, dims: list[int], stat_dim: int, rng: np.random.Generator,
             hidden: int = HIDDEN_DIM, eps_init: float = EPS_INIT) -> "ScaleNet":
        hidden_dims = dims[1:-1]
        nets = [GatedPerceptron.init(stat_dim, n, rng, hidden)
                for n in hidden_dims]
        eps = [Tensor(np.array(eps_init), requires_grad=True)
               for _ in hidden_dims]
        return cls(list(dims), nets, eps)

    def parameters(self) -> list[Tensor]:
        return [p for net in self.nets for p in net.parameters()] + self.eps

    def effective_eps(self, i: int) -> Tensor:
        return clip(self.eps[i], EPS_FLOOR, SCALE_EPS_CAP)


def scale_forward(net: ScaleNet, stats: Tensor) -> list[Tensor]:
    """Per hidden layer: s_i = 1 + eps_i * sin(perceptron(stats)) in (0, 2)."""
    return [1.0 + net.effective_eps(i) * sin(net.nets[i](stats))
            for i in range(len(net.nets))]


def scale_as_group_element(scales: list[Tensor | np.ndarray],
                           dims: list[int]) -> MonomialElement:
    """Identity-permutation monomial element with the given diagonals.

    The permutation factor of a continuous group-valued map is constant,
    so it is pinned to the identity.
    """
    diags = []
    for s in scales:
        d = s.data if isinstance(s, Tensor) else np.asarray(s, dtype=np.float64)
        if np.any(d <= 0):
            raise ValueError("scale entries must be positive")
        diags.append(d)
    g = identity_monomial(dims)
    return MonomialElement(list(dims), g.perms, diags)


def scale_act_feature(scales: list[Tensor], feat: WeightFeature) -> WeightFeature:
    """Differentiable diagonal action on a feature (identity permutation)."""
    n_l = feat.n_layers
    new_w = list(feat.weights)
    new_b = list(feat.biases)
    for i, s in enumerate(scales, start=1):  # hidden layer i, width dims[i]
        row = s.reshape((1, -1) + (1,) * (new_w[i - 1].ndim - 2))
        new_w[i - 1] = new_w[i - 1] * row
        new_b[i - 1] = new_b[i - 1] * s.reshape(1, -1)
        col = s.reshape((1, 1, -1) + (1,) * (new_w[i].ndim - 3))
        new_w[i] = new_w[i] / col
    return WeightFeature(feat.dims, new_w, new_b)


def quasi_apply_mlp(net: ScaleNet, params: MlpParams, backbone,
                    stats: Tensor) -> WeightFeature:
    """F(theta) = alpha(theta) . beta(theta) on the lifted feature."""
    if net.dims != params.dims:
        raise ShapeError("scale net dims do not match parameters")
    feat = backbone(params)
    scales = scale_forward(net, stats)
    return scale_act_feature(scales, feat)


@dataclass
class GlNet:
    """Perceptron emitting per-head (M, N) pairs near the identity."""

    heads: int
    d_head: int
    net: GatedPerceptron
    eps: Tensor

    @classmethod
    def init(cls, heads: int, d_head: int, stat_dim: int,
             rng: np.random.Generator, hidden: int = HIDDEN_DIM,
             eps_init: float = EPS_INIT) -> "GlNet":
        out_dim = 2 * heads * d_head * d_head
        eps0 = min(eps_init, 1.0 / (2 * d_head))
        return cls(heads, d_head, GatedPerceptron.init(stat_dim, out_dim, rng,
                                                       hidden),
                   Tensor(np.array(eps0), requires_grad=True))

    def parameters(self) -> list[Tensor]:
        return self.net.parameters() + [self.eps]

    def effective_eps(self) -> Tensor:
        # strict diagonal dominance of I + eps*sin(.) needs eps < 1/(2 d_h)
        return clip(self.eps, EPS_FLOOR, 1.0 / (2 * self.d_head))


def gl_forward(net: GlNet, stats: Tensor) -> list[tuple[Tensor, Tensor]]:
    """Per head: (M, N) = (I + eps*sin(pre_M), I + eps*sin(pre_N))."""
    dh = net.d_head
    pre = sin(net.net(stats)).reshape(2, net.heads, dh, dh)
    eps = net.effective_eps()
    eye = Tensor(np.eye(dh))
    out = []
    for i in range(net.heads):
        m = eye + eps * pre.take_flat(
            np.arange(dh * dh) + i * dh * dh).reshape(dh, dh)
        n = eye + eps * pre.take_flat(
            np.arange(dh * dh) + (net.heads + i) * dh * dh).reshape(dh, dh)
        for mat in (m, n):
            if abs(np.linalg.det(mat.data)) < 1e-10:
                raise ArithmeticError("GL output singular; eps clamp bypassed?")
        out.append((m, n))
    return out


def gl_as_group_element(pairs: list[tuple[Tensor, Tensor]]) -> GlMhaElement:
    """The emitted (M, N) pairs as a group element with identity head perm.

    M plays U and N^T plays V, so the action matches the applied
    transform Wq M^T, Wk M^-1, Wv N, Wo N^-T.
    """
    h = len(pairs)
    return GlMhaElement(np.arange(h), [m.data.copy() for m, _ in pairs],
                        [n.data.T.copy() for _, n in pairs])


def quasi_apply_mha(net: GlNet, params: MhaBlockParams,
                    stats: Tensor) -> dict:
    """Transform each head by its learned (M, N); returns Tensor lists."""
    if net.heads != params.heads or net.d_head != params.d_head:
        raise ShapeError("GL net does not match parameter shapes")
    pairs = gl_forward(net, stats)
    out = {"wq": [], "wk": [], "wv": [], "wo": []}
    for i, (m, n) in enumerate(pairs):
        out["wq"].append(matmul(Tensor(params.wq[i]), m.T))
        out["wk"].append(matmul(Tensor(params.wk[i]), inv(m)))
        out["wv"].append(matmul(Tensor(params.wv[i]), n))
        out["wo"].append(matmul(Tensor(params.wo[i]), inv(n).T))
    return out


def quasi_mha_params(net: GlNet, params: MhaBlockParams,
                     stats: Tensor) -> MhaBlockParams:
    """Same transform materialized back into a parameter record."""
    out = quasi_apply_mha(net, params, stats)
    ff = None if params.ff is None else tuple(t.copy() for t in params.ff)
    return MhaBlockParams([t.data.copy() for t in out["wq"]],
                          [t.data.copy() for t in out["wk"]],
                          [t.data.copy() for t in out["wv"]],
                          [t.data.copy() for t in out["wo"]], ff)
