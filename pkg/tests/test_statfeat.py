import numpy as np
import pytest

from weightsym.netmodels import MhaBlockParams, MlpParams
from weightsym.statfeat import (QUANTILE_LEVELS, mha_stat_features,
                                mlp_stat_features, stat_dim, tensor_stats)
from weightsym.tensor import Tensor


def test_sort_oracle_on_small_vector():
    # [1..5]: mean 3, population variance 2, quantiles are order stats
    out = tensor_stats(Tensor(np.array([5.0, 3.0, 1.0, 4.0, 2.0]))).data
    assert np.allclose(out, [3.0, 2.0, 1.0, 2.0, 3.0, 4.0, 5.0], atol=1e-12)


def test_quantile_interpolation():
    # two elements: median is their midpoint
    out = tensor_stats(Tensor(np.array([0.0, 1.0]))).data
    assert out[4] == pytest.approx(0.5)


def test_matches_numpy_reference():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((4, 5))
    out = tensor_stats(Tensor(x)).data
    expected = np.concatenate([
        [x.mean(), x.var()],
        np.quantile(x.reshape(-1), QUANTILE_LEVELS)])
    assert np.allclose(out, expected, atol=1e-12)


def test_stats_differentiable_matches_finite_difference():
    rng = np.random.default_rng(1)
    x0 = rng.standard_normal(7)
    weights = rng.standard_normal(7)

    def value(x):
        t = Tensor(x, requires_grad=True)
        out = (tensor_stats(t) * Tensor(weights)).sum()
        return t, out

    t, out = value(x0)
    out.backward()
    num = np.zeros(7)
    for i in range(7):
        up, dn = x0.copy(), x0.copy()
        up[i] += 1e-6
        dn[i] -= 1e-6
        num[i] = (value(up)[1].item() - value(dn)[1].item()) / 2e-6
    assert np.max(np.abs(t.grad - num)) < 1e-6


def rand_mlp(rng, dims=(2, 4, 3)):
    return MlpParams([rng.standard_normal((dims[i + 1], dims[i]))
                      for i in range(len(dims) - 1)],
                     [rng.standard_normal(dims[i + 1])
                      for i in range(len(dims) - 1)])


def test_mlp_feature_dimension():
    rng = np.random.default_rng(2)
    p = rand_mlp(rng)
    feats = mlp_stat_features(p)
    assert feats.shape == (14 * p.n_layers,)
    assert stat_dim(p) == 14 * p.n_layers


def test_mha_feature_dimension_with_and_without_ff():
    rng = np.random.default_rng(3)
    sh = (6, 3)
    bare = MhaBlockParams(*[[rng.standard_normal(sh) for _ in range(2)]
                            for _ in range(4)])
    assert mha_stat_features(bare).shape == (28,)
    withff = MhaBlockParams(bare.wq, bare.wk, bare.wv, bare.wo,
                            (rng.standard_normal((12, 6)),
                             rng.standard_normal(12),
                             rng.standard_normal((6, 12)),
                             rng.standard_normal(6)))
    assert mha_stat_features(withff).shape == (56,)


def test_mha_stats_invariant_under_head_permutation():
    rng = np.random.default_rng(4)
    sh = (6, 3)
    p = MhaBlockParams(*[[rng.standard_normal(sh) for _ in range(3)]
                         for _ in range(4)])
    q = MhaBlockParams(p.wq[::-1], p.wk[::-1], p.wv[::-1], p.wo[::-1])
    assert np.allclose(mha_stat_features(p).data, mha_stat_features(q).data,
                       atol=1e-12)


def test_feature_order_is_forward_layer_order():
    rng = np.random.default_rng(5)
    p = rand_mlp(rng)
    feats = mlp_stat_features(p).data
    first = tensor_stats(Tensor(p.weights[0])).data
    assert np.allclose(feats[:7], first, atol=1e-15)
