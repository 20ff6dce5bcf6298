import warnings

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from weightsym.metrics import DegenerateRankingWarning, kendall_tau


def brute_force_tau(x, y):
    """O(n^2) pair counting with tie correction (tau-b)."""
    n = len(x)
    conc = disc = tx = ty = 0
    for i in range(n):
        for j in range(i + 1, n):
            a, b = x[i] - x[j], y[i] - y[j]
            if a == 0 and b == 0:
                tx += 1
                ty += 1
            elif a == 0:
                tx += 1
            elif b == 0:
                ty += 1
            elif a * b > 0:
                conc += 1
            else:
                disc += 1
    n0 = n * (n - 1) / 2
    denom = np.sqrt((n0 - tx) * (n0 - ty))
    return (conc - disc) / denom if denom > 0 else 0.0


def test_matches_brute_force_many_instances():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(2, 12))
        # integer values make ties common
        x = rng.integers(0, 5, size=n).astype(float)
        y = rng.integers(0, 5, size=n).astype(float)
        if np.all(x == x[0]) or np.all(y == y[0]):
            continue
        assert kendall_tau(x, y) == pytest.approx(brute_force_tau(x, y),
                                                  abs=1e-12)


def test_perfect_orders():
    x = [1.0, 2.0, 3.0, 4.0]
    assert kendall_tau(x, x) == pytest.approx(1.0)
    assert kendall_tau(x, x[::-1]) == pytest.approx(-1.0)


def test_constant_input_warns_and_returns_zero():
    with pytest.warns(DegenerateRankingWarning):
        assert kendall_tau([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) == 0.0


def test_errors():
    with pytest.raises(ValueError):
        kendall_tau([1.0], [1.0])
    with pytest.raises(ValueError):
        kendall_tau([1.0, 2.0], [1.0, 2.0, 3.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=20, unique=True),
       st.sampled_from([lambda v: 2 * v + 1, np.exp, lambda v: v ** 3]))
def test_invariant_under_monotone_transforms(xs, f):
    rng = np.random.default_rng(abs(hash(tuple(xs))) % 2 ** 32)
    ys = rng.standard_normal(len(xs))
    x = np.array(xs)
    assume(len(np.unique(f(x))) == len(x))  # transform must not underflow to ties
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateRankingWarning)
        base = kendall_tau(x, ys)
        transformed = kendall_tau(f(x), ys)
    assert transformed == pytest.approx(base, abs=1e-9)
