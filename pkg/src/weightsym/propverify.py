"""Executable checks for the algebra behind the quasi layer.

Everything here is phrased as "compute both sides, report the worst
absolute difference": quasi-equivariance with an explicit witness
element, the normalized cocycle identity for the lifted map
a(g, p) = a_hat(g.p) * g * a_hat(p)^-1, gauge transforms of cocycles,
the coboundary-to-strict-equivariance reduction, and consistency of the
witness on stabilizer elements.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .equivlayers import WeightFeature, monomial_act_feature
from .netmodels import MhaBlockParams, MlpParams
from .quasilayers import (GlNet, ScaleNet, gl_as_group_element, gl_forward,
                          quasi_mha_params, scale_as_group_element,
                          scale_forward)
from .statfeat import mha_stat_features, mlp_stat_features
from .symmetry import (GlMhaElement, GroupElement, MonomialElement, act,
                       compose, identity_monomial, inverse, sample_gl,
                       sample_monomial)
from .tensor import Tensor


@dataclass
class PropertyReport:
    name: str
    passed: bool
    worst: float
    tol: float
    detail: str = ""


# -- diffs --------------------------------------------------------------

def feature_diff(a: WeightFeature, b: WeightFeature) -> float:
    worst = 0.0
    for ta, tb in zip(a.weights + a.biases, b.weights + b.biases):
        worst = max(worst, float(np.max(np.abs(ta.data - tb.data))))
    return worst


def element_diff(a: GroupElement, b: GroupElement) -> float:
    """Max abs difference of the continuous parts; inf on perm mismatch."""
    if isinstance(a, MonomialElement):
        for pa, pb in zip(a.perms, b.perms):
            if not np.array_equal(pa, pb):
                return np.inf
        return max(float(np.max(np.abs(da - db)))
                   for da, db in zip(a.diags, b.diags))
    if not np.array_equal(a.head_perm, b.head_perm):
        return np.inf
    worst = 0.0
    for ua, ub in zip(a.u + a.v, b.u + b.v):
        worst = max(worst, float(np.max(np.abs(ua - ub))))
    return worst


def params_diff(a, b) -> float:
    if isinstance(a, MlpParams):
        pairs = list(zip(a.weights + a.biases, b.weights + b.biases))
    else:
        pairs = [(ta, tb) for role in ("wq", "wk", "wv", "wo")
                 for ta, tb in zip(getattr(a, role), getattr(b, role))]
    return max(float(np.max(np.abs(ta - tb))) for ta, tb in pairs)


# -- the learned alpha as a group-valued map ----------------------------

def alpha_hat_mlp(net: ScaleNet, params: MlpParams) -> MonomialElement:
    scales = scale_forward(net, mlp_stat_features(params))
    return scale_as_group_element(scales, params.dims)


def alpha_hat_mha(net: GlNet, params: MhaBlockParams) -> GlMhaElement:
    return gl_as_group_element(gl_forward(net, mha_stat_features(params)))


def lifted_cocycle(alpha_hat, g: GroupElement, params) -> GroupElement:
    """a(g, p) = a_hat(g.p) * g * a_hat(p)^-1 — a cocycle by telescoping."""
    return compose(alpha_hat(act(g, params)),
                   compose(g, inverse(alpha_hat(params))))


def broken_cocycle(alpha_hat, g: GroupElement, params) -> GroupElement:
    """Deliberately wrong variant (inverse dropped); must fail the identity."""
    return compose(alpha_hat(act(g, params)), compose(g, alpha_hat(params)))


# -- checks -------------------------------------------------------------

def witness_quasi_equivariance(net: ScaleNet, backbone, params: MlpParams,
                               g: MonomialElement,
                               tol: float = 1e-9) -> PropertyReport:
    """F = a_hat-action after an equivariant backbone; check
    F(g.p) == witness . F(p) with witness = a_hat(g.p) * g * a_hat(p)^-1."""
    def f(p):
        scales = scale_forward(net, mlp_stat_features(p))
        return monomial_act_feature(scale_as_group_element(scales, p.dims),
                                    backbone(p))
    moved = act(g, params)
    witness = lifted_cocycle(lambda p: alpha_hat_mlp(net, p), g, params)
    worst = feature_diff(f(moved), monomial_act_feature(witness, f(params)))
    return PropertyReport("quasi_equivariance_mlp", worst < tol, worst, tol)


def witness_quasi_equivariance_mha(net: GlNet, params: MhaBlockParams,
                                   g: GlMhaElement,
                                   tol: float = 1e-9) -> PropertyReport:
    def f(p):
        return quasi_mha_params(net, p, mha_stat_features(p))
    moved = act(g, params)
    witness = lifted_cocycle(lambda p: alpha_hat_mha(net, p), g, params)
    worst = params_diff(f(moved), act(witness, f(params)))
    return PropertyReport("quasi_equivariance_mha", worst < tol, worst, tol)


def check_cocycle(alpha, g1: GroupElement, g2: GroupElement, params,
                  tol: float = 1e-9, name: str = "cocycle") -> PropertyReport:
    """Normalization a(e, p) = e and composition a(g1 g2, p) =
    a(g1, g2.p) * a(g2, p), for any map alpha(g, p) -> group element."""
    if isinstance(g1, MonomialElement):
        e = identity_monomial(g1.dims)
    else:
        e = GlMhaElement(np.arange(g1.heads),
                         [np.eye(g1.u[0].shape[0]) for _ in range(g1.heads)],
                         [np.eye(g1.u[0].shape[0]) for _ in range(g1.heads)])
    worst = element_diff(alpha(e, params), e)
    lhs = alpha(compose(g1, g2), params)
    rhs = compose(alpha(g1, act(g2, params)), alpha(g2, params))
    worst = max(worst, element_diff(lhs, rhs))
    return PropertyReport(name, worst < tol, worst, tol)


def check_gauge(alpha, beta_hat, g1, g2, params,
                tol: float = 1e-9) -> PropertyReport:
    """The gauge transform b_hat(g.p) * a(g, p) * b_hat(p)^-1 of a cocycle
    is again a cocycle."""
    def gauged(g, p):
        return compose(beta_hat(act(g, p)),
                       compose(alpha(g, p), inverse(beta_hat(p))))
    return check_cocycle(gauged, g1, g2, params, tol, name="gauge_cocycle")


def check_coboundary_reduction(net: ScaleNet, backbone, params: MlpParams,
                               g: MonomialElement,
                               tol: float = 1e-10) -> PropertyReport:
    """Undoing the a_hat factor, F'(p) = a_hat(p)^-1 . F(p), must be
    strictly equivariant: F'(g.p) == g . F'(p)."""
    def f_prime(p):
        scales = scale_forward(net, mlp_stat_features(p))
        elem = scale_as_group_element(scales, p.dims)
        feat = monomial_act_feature(elem, backbone(p))
        return monomial_act_feature(inverse(elem), feat)
    moved = act(g, params)
    worst = feature_diff(f_prime(moved), monomial_act_feature(g, f_prime(params)))
    return PropertyReport("coboundary_reduction", worst < tol, worst, tol)


def check_stabilizer_consistency(net: ScaleNet, backbone,
                                 tol: float = 1e-9,
                                 seed: int = 0) -> PropertyReport:
    """On a point with two identical hidden neurons, the swap fixes the
    parameters, and its witness must fix F(p) as well."""
    rng = np.random.default_rng(seed)
    dims = net.dims
    ws = [rng.standard_normal((dims[i + 1], dims[i]))
          for i in range(len(dims) - 1)]
    bs = [rng.standard_normal(dims[i + 1]) for i in range(len(dims) - 1)]
    # duplicate hidden neurons 0 and 1 of the first hidden layer
    ws[0][1] = ws[0][0]
    bs[0][1] = bs[0][0]
    ws[1][:, 1] = ws[1][:, 0]
    params = MlpParams(ws, bs)
    h = identity_monomial(dims)
    perm0 = np.arange(dims[1])
    perm0[[0, 1]] = perm0[[1, 0]]
    h = MonomialElement(dims, [perm0] + h.perms[1:], h.diags)
    if params_diff(act(h, params), params) > 1e-12:
        return PropertyReport("stabilizer_consistency", False, np.inf, tol,
                              "constructed swap is not a stabilizer")

    def f(p):
        scales = scale_forward(net, mlp_stat_features(p))
        return monomial_act_feature(scale_as_group_element(scales, p.dims),
                                    backbone(p))
    witness = lifted_cocycle(lambda p: alpha_hat_mlp(net, p), h, params)
    f_p = f(params)
    worst = feature_diff(monomial_act_feature(witness, f_p), f_p)
    return PropertyReport("stabilizer_consistency", worst < tol, worst, tol)


def feature_stats(feat: WeightFeature) -> Tensor:
    from .statfeat import tensor_stats
    parts = []
    for w, b in zip(feat.weights, feat.biases):
        parts.append(tensor_stats(w))
        parts.append(tensor_stats(b))
    from .tensor import concat
    return concat(parts)


def check_composition(net1: ScaleNet, net2: ScaleNet, backbone,
                      params: MlpParams, g: MonomialElement,
                      tol: float = 1e-9) -> PropertyReport:
    """Two stacked quasi layers stay quasi-equivariant: the composed
    witness is w2(w1, phi(p)) with w1 the first layer's witness."""
    def phi(p):
        scales = scale_forward(net1, mlp_stat_features(p))
        return monomial_act_feature(scale_as_group_element(scales, p.dims),
                                    backbone(p))

    def psi(feat):
        scales = scale_forward(net2, feature_stats(feat))
        return monomial_act_feature(
            scale_as_group_element(scales, feat.dims), feat)

    def alpha2_hat(feat):
        scales = scale_forward(net2, feature_stats(feat))
        return scale_as_group_element(scales, feat.dims)

    w1 = lifted_cocycle(lambda p: alpha_hat_mlp(net1, p), g, params)
    phi_p = phi(params)
    w2 = compose(alpha2_hat(monomial_act_feature(w1, phi_p)),
                 compose(w1, inverse(alpha2_hat(phi_p))))
    lhs = psi(phi(act(g, params)))
    rhs = monomial_act_feature(w2, psi(phi_p))
    worst = feature_diff(lhs, rhs)
    return PropertyReport("two_layer_composition", worst < tol, worst, tol)


# -- suite --------------------------------------------------------------

def run_suite(seed: int = 0, samples: int = 5, dims=(2, 8, 8, 2),
              heads: int = 2, d: int = 8, d_head: int = 4,
              backbone=None, csv_path=None) -> list[PropertyReport]:
    """Sampled verification of all identities; worst case over draws."""
    rng = np.random.default_rng(seed)
    dims = list(dims)
    net = ScaleNet.init(dims, 14 * (len(dims) - 1), rng)
    net2 = ScaleNet.init(dims, 14 * (len(dims) - 1), rng)
    gl = GlNet.init(heads, d_head, 28, rng)
    if backbone is None:
        def backbone(p):
            from .equivlayers import lift
            return lift(p)

    def rand_mlp():
        ws = [rng.standard_normal((dims[i + 1], dims[i]))
              for i in range(len(dims) - 1)]
        bs = [rng.standard_normal(dims[i + 1]) for i in range(len(dims) - 1)]
        return MlpParams(ws, bs)

    def rand_mha():
        sh = (d, d_head)
        return MhaBlockParams(*[[rng.standard_normal(sh) for _ in range(heads)]
                                for _ in range(4)])

    def worst_of(make_report):
        best = None
        for _ in range(samples):
            r = make_report()
            if best is None or r.worst > best.worst:
                best = r
        return best

    a_mlp = lambda p: alpha_hat_mlp(net, p)
    a_mha = lambda p: alpha_hat_mha(gl, p)
    reports = [
        worst_of(lambda: witness_quasi_equivariance(
            net, backbone, rand_mlp(), sample_monomial(dims, 1, 10, rng=rng))),
        worst_of(lambda: witness_quasi_equivariance_mha(
            gl, rand_mha(), sample_gl(heads, d_head, 1.0, rng=rng))),
        worst_of(lambda: check_cocycle(
            lambda g, p: lifted_cocycle(a_mlp, g, p),
            sample_monomial(dims, 1, 10, rng=rng),
            sample_monomial(dims, 1, 10, rng=rng), rand_mlp())),
        worst_of(lambda: check_gauge(
            lambda g, p: lifted_cocycle(a_mlp, g, p), a_mlp,
            sample_monomial(dims, 1, 10, rng=rng),
            sample_monomial(dims, 1, 10, rng=rng), rand_mlp())),
        worst_of(lambda: check_coboundary_reduction(
            net, backbone, rand_mlp(), sample_monomial(dims, 1, 10, rng=rng))),
        check_stabilizer_consistency(net, backbone, seed=seed),
        worst_of(lambda: check_composition(
            net, net2, backbone, rand_mlp(),
            sample_monomial(dims, 1, 10, rng=rng))),
    ]
    # negative control: the broken variant must be caught
    broken = worst_of(lambda: check_cocycle(
        lambda g, p: broken_cocycle(a_mlp, g, p),
        sample_monomial(dims, 1, 10, rng=rng),
        sample_monomial(dims, 1, 10, rng=rng), rand_mlp(),
        name="broken_cocycle_detected"))
    reports.append(PropertyReport(broken.name, not broken.passed,
                                  broken.worst, broken.tol,
                                  "passes iff the identity fails"))
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["name", "passed", "worst", "tol", "detail"])
            for r in reports:
                w.writerow([r.name, r.passed, repr(r.worst), repr(r.tol),
                            r.detail])
    return reports


def format_reports(reports: list[PropertyReport]) -> str:
    lines = []
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{status}  {r.name:28s} worst={r.worst:.3e} "
                     f"tol={r.tol:.1e} {r.detail}")
    return "\n".join(lines)
