"""Acceptance gate: one test per criterion, one PASS/FAIL line each.

Run with `pytest -v tests/test_acceptance.py -s` to see the lines; the
heavy learning-signal criterion trains 5 seeds with the quasi layer on
and off and reports the paired difference with its standard error.
"""

import numpy as np
import pytest

import weightsym.symmetry as symmetry
from weightsym.equivlayers import (channel_mix, equiv_relu, lift,
                                   monomial_act_feature)
from weightsym.metanet import MetanetConfig, build, evaluate, train
from weightsym.metrics import kendall_tau
from weightsym.netmodels import (Conv1dParams, MhaBlockParams, MlpParams,
                                 mha_forward)
from weightsym.propverify import (alpha_hat_mlp, check_cocycle,
                                  check_coboundary_reduction, check_gauge,
                                  feature_diff, lifted_cocycle,
                                  witness_quasi_equivariance,
                                  witness_quasi_equivariance_mha)
from weightsym.quasilayers import GlNet, ScaleNet, scale_as_group_element, \
    scale_forward
from weightsym.statfeat import mlp_stat_features, tensor_stats
from weightsym.symmetry import (act, check_functional_equiv, forward,
                                sample_gl, sample_monomial)
from weightsym.tensor import Tensor
from weightsym.zoogen import augment_zoo, gen_mlp_zoo

DIMS = [2, 8, 8, 2]


def report(criterion: int, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"\nACCEPTANCE {criterion}: {status} — {detail}")
    assert passed, f"criterion {criterion}: {detail}"


def rand_mlp(rng, dims=DIMS):
    return MlpParams([rng.standard_normal((dims[i + 1], dims[i]))
                      for i in range(len(dims) - 1)],
                     [rng.standard_normal(dims[i + 1])
                      for i in range(len(dims) - 1)])


def rand_conv(rng):
    return Conv1dParams([rng.standard_normal((4, 2, 3)),
                         rng.standard_normal((3, 4, 3))],
                        [rng.standard_normal(4), rng.standard_normal(3)])


def rand_mha(rng, heads=2, d=8, d_head=4):
    sh = (d, d_head)
    return MhaBlockParams(*[[rng.standard_normal(sh) for _ in range(heads)]
                            for _ in range(4)])


@pytest.fixture(scope="module")
def mlp_zoo():
    return gen_mlp_zoo(n=500, seed=0)


@pytest.fixture(scope="module")
def trained_model(mlp_zoo):
    model = build(MetanetConfig(epochs=8, quasi=True, seed=0))
    train(model, mlp_zoo)
    return model


def test_criterion_1_symmetry_group_fidelity():
    rng = np.random.default_rng(10)
    worst_mono = 0.0
    for maker in (rand_mlp, rand_conv):
        for _ in range(200):
            p = maker(rng)
            g = sample_monomial(p.dims, 1.0, 1e3, rng=rng)
            _, dev = check_functional_equiv(p, act(g, p), n_samples=3,
                                            rng=rng)
            worst_mono = max(worst_mono, dev)
    worst_gl = 0.0
    for _ in range(200):
        p = rand_mha(rng)
        g = sample_gl(p.heads, p.d_head, spread=10.0, rng=rng)
        q = act(g, p)
        x = rng.standard_normal((5, p.d))
        fa, fb = forward(p, x), forward(q, x)
        rel = np.max(np.abs(fa - fb)) / (np.max(np.abs(fa)) + 1e-12)
        worst_gl = max(worst_gl, rel)
    passed = worst_mono < 1e-8 and worst_gl < 1e-6
    report(1, passed, f"monomial dev {worst_mono:.2e} (tol 1e-8), "
                      f"GL rel dev {worst_gl:.2e} (tol 1e-6)")


def test_criterion_2_strict_equivariance_reduction():
    rng = np.random.default_rng(20)
    net = ScaleNet.init(DIMS, 14 * 3, rng)
    for e in net.eps:
        zero = np.zeros(e.shape)
        zero.flags.writeable = False
        e.data = zero
    mix = Tensor(rng.standard_normal((3, 1)))

    def f(p):
        feat = equiv_relu(channel_mix(mix, lift(p)))
        scales = scale_forward(net, mlp_stat_features(p))
        return monomial_act_feature(scale_as_group_element(scales, p.dims),
                                    feat)

    worst = 0.0
    for _ in range(100):
        p = rand_mlp(rng)
        g = sample_monomial(DIMS, 1.0, 10.0, rng=rng)
        lhs, rhs = f(act(g, p)), monomial_act_feature(g, f(p))
        scale = max(max(np.max(np.abs(t.data)) for t in lhs.weights), 1e-12)
        worst = max(worst, feature_diff(lhs, rhs) / scale)
    report(2, worst < 1e-10,
           f"frozen-eps strict equivariance rel residual {worst:.2e} "
           f"(tol 1e-10)")


def test_criterion_3_quasi_equivariance_witness():
    rng = np.random.default_rng(30)
    net = ScaleNet.init(DIMS, 14 * 3, rng)
    gl = GlNet.init(2, 4, 28, rng)
    worst = 0.0
    for _ in range(100):
        # residuals taken relative to the transformed parameter magnitude
        p = rand_mlp(rng)
        g = sample_monomial(DIMS, 1, 10, rng=rng)
        r = witness_quasi_equivariance(net, lift, p, g)
        scale = max(np.max(np.abs(w)) for w in act(g, p).weights)
        worst = max(worst, r.worst / max(scale, 1.0))
        q = rand_mha(rng)
        h = sample_gl(2, 4, spread=1.0, rng=rng)
        r = witness_quasi_equivariance_mha(gl, q, h)
        moved = act(h, q)
        scale = max(np.max(np.abs(w)) for role in ("wq", "wk", "wv", "wo")
                    for w in getattr(moved, role))
        worst = max(worst, r.worst / max(scale, 1.0))
    report(3, worst < 1e-9,
           f"witness rel residual {worst:.2e} over monomial+GL (tol 1e-9)")


def test_criterion_4_end_to_end_invariance(trained_model, mlp_zoo):
    rng = np.random.default_rng(40)
    test_entries = [e for e in mlp_zoo.entries if e.split == "test"][:40]
    worst3 = worst4 = 0.0
    for e in test_entries:
        base = trained_model.predict(e.params)
        g3 = sample_monomial(DIMS, 1.0, 1e3, rng=rng)
        g4 = sample_monomial(DIMS, 1.0, 1e4, rng=rng)
        d3 = abs(trained_model.predict(act(g3, e.params)) - base)
        d4 = abs(trained_model.predict(act(g4, e.params)) - base)
        worst3 = max(worst3, d3 / max(abs(base), 1e-12))
        worst4 = max(worst4, d4 / max(abs(base), 1e-12))
    # tau on original vs group-transformed test set
    labels = [e.label for e in test_entries]
    preds = [trained_model.predict(e.params) for e in test_entries]
    aug_preds = [trained_model.predict(
        act(sample_monomial(DIMS, 1.0, 1e3, rng=rng), e.params))
        for e in test_entries]
    dtau = abs(kendall_tau(preds, labels) - kendall_tau(aug_preds, labels))
    passed = worst3 < 1e-9 and worst4 < 1e-4 and dtau < 1e-9
    report(4, passed,
           f"pred rel change {worst3:.2e} @1e3 (tol 1e-9), "
           f"{worst4:.2e} @1e4 (tol 1e-4), |dtau| {dtau:.2e} (tol 1e-9)")


def test_criterion_5_cocycle_and_gauge_suite():
    rng = np.random.default_rng(50)
    net = ScaleNet.init(DIMS, 14 * 3, rng)
    a_hat = lambda p: alpha_hat_mlp(net, p)
    alpha = lambda g, p: lifted_cocycle(a_hat, g, p)
    worst_c = worst_g = worst_b = 0.0
    for _ in range(100):
        p = rand_mlp(rng)
        g1 = sample_monomial(DIMS, 1.0, 10.0, rng=rng)
        g2 = sample_monomial(DIMS, 1.0, 10.0, rng=rng)
        worst_c = max(worst_c, check_cocycle(alpha, g1, g2, p).worst)
        worst_g = max(worst_g, check_gauge(alpha, a_hat, g1, g2, p).worst)
        worst_b = max(worst_b,
                      check_coboundary_reduction(net, lift, p, g1).worst)
    passed = worst_c < 1e-9 and worst_g < 1e-9 and worst_b < 1e-10
    report(5, passed,
           f"cocycle {worst_c:.2e}, gauge {worst_g:.2e} (tol 1e-9), "
           f"coboundary {worst_b:.2e} (tol 1e-10)")


def test_criterion_6_gradient_correctness(mlp_zoo):
    from weightsym.optim import bce_loss
    rng = np.random.default_rng(60)
    model = build(MetanetConfig(epochs=1, seed=1))
    batch = mlp_zoo.entries[:4]
    params = model.parameters()

    def loss_value():
        from weightsym.tensor import concat
        preds = concat([model.forward(e.params) for e in batch])
        targets = Tensor(np.array([e.label for e in batch]))
        return bce_loss(preds, targets)

    loss = loss_value()
    for p in params:
        p.zero_grad()
    loss.backward()
    worst = 0.0
    step = 1e-5
    for _ in range(20):
        t = params[int(rng.integers(len(params)))]
        idx = int(rng.integers(t.size))
        analytic = t.grad.reshape(-1)[idx] if t.grad is not None else 0.0
        base = t.data
        for sign in (+1, -1):
            shifted = base.reshape(-1).copy()
            shifted[idx] += sign * step
            shifted = shifted.reshape(base.shape)
            shifted.flags.writeable = False
            t.data = shifted
            if sign > 0:
                up = loss_value().item()
            else:
                dn = loss_value().item()
        t.data = base
        numeric = (up - dn) / (2 * step)
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-12)
        worst = max(worst, rel)
    report(6, worst < 1e-5,
           f"training-loss grad check max rel err {worst:.2e} (tol 1e-5)")


def test_criterion_7_desk_scale_learning_signal(mlp_zoo):
    taus_on, taus_off = [], []
    for seed in range(5):
        for quasi, sink in ((True, taus_on), (False, taus_off)):
            model = build(MetanetConfig(epochs=50, quasi=quasi, seed=seed))
            train(model, mlp_zoo)
            sink.append(evaluate(model, mlp_zoo, split="test")["tau"])
    diffs = np.array(taus_on) - np.array(taus_off)
    sem = diffs.std(ddof=1) / np.sqrt(len(diffs))
    passed = max(taus_on) >= 0.5
    report(7, passed,
           f"quasi test tau per seed {[round(t, 3) for t in taus_on]} "
           f"(need >= 0.5); on-off diff {diffs.mean():.3f} +/- {sem:.3f} "
           f"over 5 seeds")


def test_criterion_8_oracle_equivalence():
    rng = np.random.default_rng(80)
    # kendall vs brute force
    worst_k = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 10))
        x = rng.integers(0, 4, size=n).astype(float)
        y = rng.integers(0, 4, size=n).astype(float)
        if np.all(x == x[0]) or np.all(y == y[0]):
            continue
        conc = sum(np.sign(x[i] - x[j]) * np.sign(y[i] - y[j]) > 0
                   for i in range(n) for j in range(i + 1, n))
        disc = sum(np.sign(x[i] - x[j]) * np.sign(y[i] - y[j]) < 0
                   for i in range(n) for j in range(i + 1, n))
        tx = sum(x[i] == x[j] and y[i] != y[j]
                 for i in range(n) for j in range(i + 1, n))
        ty = sum(y[i] == y[j] and x[i] != x[j]
                 for i in range(n) for j in range(i + 1, n))
        txy = sum(x[i] == x[j] and y[i] == y[j]
                  for i in range(n) for j in range(i + 1, n))
        n0 = n * (n - 1) / 2
        ref = (conc - disc) / np.sqrt((n0 - tx - txy) * (n0 - ty - txy))
        worst_k = max(worst_k, abs(kendall_tau(x, y) - ref))
    # tensor_stats vs sort oracle
    v = rng.standard_normal(9)
    s = np.sort(v)
    stats = tensor_stats(Tensor(v)).data
    expected = np.concatenate([[v.mean(), v.var()],
                               s[[0, 2, 4, 6, 8]]])
    stats_exact = np.max(np.abs(stats - expected))
    # mha forward vs scalar loop
    p = rand_mha(rng)
    x = rng.standard_normal((4, 8))
    acc = np.zeros((4, 8))
    for i in range(p.heads):
        q, k, v2 = x @ p.wq[i], x @ p.wk[i], x @ p.wv[i]
        scores = q @ k.T
        att = np.zeros((4, 4))
        for r in range(4):
            e = np.exp(scores[r] - scores[r].max())
            att[r] = e / e.sum()
        acc += att @ v2 @ p.wo[i].T
    mha_dev = np.max(np.abs(mha_forward(p, x) - acc))
    passed = worst_k < 1e-12 and stats_exact < 1e-12 and mha_dev < 1e-12
    report(8, passed,
           f"kendall dev {worst_k:.1e}, stats dev {stats_exact:.1e}, "
           f"mha dev {mha_dev:.1e} (all tol 1e-12)")


def test_criterion_9_mutation_sensitivity(monkeypatch, trained_model,
                                          mlp_zoo):
    rng = np.random.default_rng(90)
    original = symmetry.monomial_act

    def broken_act(g, params):
        # deliberate bug: drop the inverse on the incoming diagonal
        q = original(g, params)
        ws = [w.copy() for w in q.weights]
        for i in range(1, len(ws)):
            d = g.diags[i - 1]
            ws[i] = ws[i] * d[None, :] * d[None, :]
        return MlpParams(ws, [b.copy() for b in q.biases])

    monkeypatch.setattr(symmetry, "monomial_act", broken_act)
    # criterion-1 style check now fails
    p = rand_mlp(rng)
    g = sample_monomial(DIMS, 2.0, 10.0, rng=rng)
    ok, dev = check_functional_equiv(p, symmetry.act(g, p), rng=rng)
    c1_detects = (not ok) and dev > 1e-8
    # criterion-4 style check now fails
    e = [en for en in mlp_zoo.entries if en.split == "test"][0]
    base = trained_model.predict(e.params)
    moved = trained_model.predict(symmetry.act(g, e.params))
    c4_detects = abs(moved - base) / max(abs(base), 1e-12) > 1e-9
    monkeypatch.undo()
    report(9, c1_detects and c4_detects,
           f"injected action bug detected: functional dev {dev:.2e}, "
           f"prediction rel change {abs(moved - base) / abs(base):.2e}")
