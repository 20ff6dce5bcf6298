import csv

import numpy as np
import pytest

from weightsym.equivlayers import lift
from weightsym.netmodels import MlpParams
from weightsym.propverify import (PropertyReport, alpha_hat_mlp,
                                  broken_cocycle, check_cocycle,
                                  check_composition, check_gauge,
                                  check_stabilizer_consistency,
                                  element_diff, format_reports,
                                  lifted_cocycle, run_suite,
                                  witness_quasi_equivariance)
from weightsym.quasilayers import ScaleNet
from weightsym.symmetry import identity_monomial, sample_monomial

DIMS = [2, 5, 4, 3]


@pytest.fixture(scope="module")
def setup():
    rng = np.random.default_rng(0)
    net = ScaleNet.init(DIMS, 14 * 3, rng)
    p = MlpParams([rng.standard_normal((DIMS[i + 1], DIMS[i]))
                   for i in range(3)],
                  [rng.standard_normal(DIMS[i + 1]) for i in range(3)])
    return rng, net, p


def test_suite_all_pass():
    reports = run_suite(seed=0, samples=5)
    assert all(r.passed for r in reports), format_reports(reports)


def test_report_pass_flag_recomputable():
    for r in run_suite(seed=1, samples=2):
        if r.name != "broken_cocycle_detected":
            assert r.passed == (r.worst < r.tol)


def test_witness_residual_small(setup):
    rng, net, p = setup
    g = sample_monomial(DIMS, 1.0, 100.0, rng=rng)
    r = witness_quasi_equivariance(net, lift, p, g)
    assert r.passed and r.worst < 1e-9


def test_cocycle_normalized_at_identity(setup):
    rng, net, p = setup
    e = identity_monomial(DIMS)
    alpha = lambda g, q: lifted_cocycle(lambda t: alpha_hat_mlp(net, t), g, q)
    assert element_diff(alpha(e, p), e) < 1e-12


def test_broken_cocycle_fails(setup):
    rng, net, p = setup
    g1 = sample_monomial(DIMS, 1.0, 10.0, rng=rng)
    g2 = sample_monomial(DIMS, 1.0, 10.0, rng=rng)
    alpha = lambda g, q: broken_cocycle(
        lambda t: alpha_hat_mlp(net, t), g, q)
    r = check_cocycle(alpha, g1, g2, p)
    assert not r.passed


def test_gauge_transform_of_cocycle(setup):
    rng, net, p = setup
    g1 = sample_monomial(DIMS, 1.0, 10.0, rng=rng)
    g2 = sample_monomial(DIMS, 1.0, 10.0, rng=rng)
    a_hat = lambda q: alpha_hat_mlp(net, q)
    alpha = lambda g, q: lifted_cocycle(a_hat, g, q)
    assert check_gauge(alpha, a_hat, g1, g2, p).passed


def test_stabilizer_consistency(setup):
    _, net, _ = setup
    assert check_stabilizer_consistency(net, lift).passed


def test_composition_of_two_quasi_layers(setup):
    rng, net, p = setup
    net2 = ScaleNet.init(DIMS, 14 * 3, np.random.default_rng(9))
    g = sample_monomial(DIMS, 1.0, 10.0, rng=rng)
    assert check_composition(net, net2, lift, p, g).passed


def test_csv_output(tmp_path):
    path = tmp_path / "reports.csv"
    reports = run_suite(seed=2, samples=1, csv_path=path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(reports)
    assert {"name", "passed", "worst", "tol"} <= set(rows[0])


def test_format_reports_one_line_each():
    reports = [PropertyReport("demo", True, 1e-12, 1e-9)]
    text = format_reports(reports)
    assert text.startswith("PASS") and "demo" in text
