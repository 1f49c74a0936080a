import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hawkesgc.basis import BasisConfig, select_basis
from hawkesgc.evaluation import (evaluate, kernel_error_table, loglike_test, phi_error_pairs,
                                 relative_error_mu, relative_error_phi, relative_kernel_error,
                                 score_graph, threshold_sweep)
from hawkesgc.learn import LearnConfig, fit
from hawkesgc.model import Dataset, EventSequence, GrangerGraph, ModelParams
from hawkesgc.simulate import GroundTruth, make_synthetic


def test_relative_error_mu_examples():
    assert relative_error_mu([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert relative_error_mu([0.0, 1.0], [1.0, 0.0]) == pytest.approx(math.sqrt(2))
    assert relative_error_mu([3.0, 0.0], [3.0, 4.0]) == pytest.approx(0.8)
    with pytest.raises(ValueError):
        relative_error_mu([1.0, 1.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        relative_error_mu([1.0], [1.0, 1.0])


def test_loglike_test_examples():
    basis = BasisConfig(np.array([0.0]), 1.0, 5.0)
    params = ModelParams([0.3, 0.2], np.full((2, 2, 1), 0.1))
    empty = Dataset((EventSequence([], [], 5.0), EventSequence([], [], 2.0)), 2)
    assert loglike_test(params, basis, empty) == pytest.approx(-(5.0 + 2.0) * 0.5)
    one = Dataset((EventSequence([0.5], [0], 1.0),), 1)
    assert loglike_test(ModelParams([1.0], [[[0.0]]]), basis, one) == pytest.approx(-1.0)


def test_truth_beats_shuffled_parameters():
    data, gt = make_synthetic(60, 50.0, seed=3)
    basis = select_basis(data)
    # a basis rendering of the truth versus the same coefficients on the wrong pairs
    grid = np.linspace(0, basis.horizon, 4001)
    design = basis.evaluate(grid)
    target = gt.kernel_values(grid).reshape(25, -1).T
    coef = np.maximum(np.linalg.lstsq(design, target, rcond=None)[0].T.reshape(5, 5, -1), 0)
    good = ModelParams(gt.mu, coef)
    perm = np.random.default_rng(0).permutation(25)
    shuffled = ModelParams(gt.mu[::-1], coef.reshape(25, -1)[perm].reshape(coef.shape))
    assert loglike_test(good, basis, data) > loglike_test(shuffled, basis, data)


def _grid_values(func, grid):
    return np.asarray([func(t) for t in grid])


def test_rectangle_example():
    grid = np.linspace(0.0, 2.0, 2001)
    truth = np.where(grid <= 1.0, 1.0, 0.0)[None, :]
    est = 0.5 * truth
    assert relative_kernel_error(est, truth, grid) == pytest.approx(0.5)
    err, mass = kernel_error_table(est, truth, grid)
    assert err[0] == pytest.approx(0.5 * mass[0])


def test_phi_error_examples():
    _, gt = make_synthetic(0, seed=1)
    basis = BasisConfig.uniform(5, 50.0, 5.0)
    zero = ModelParams(gt.mu, np.zeros((5, 5, 5)))
    assert relative_error_phi(zero, basis, gt) == pytest.approx(1.0)
    basis_truth = GroundTruth(gt.mu, "basis", params=ModelParams(gt.mu, np.ones((5, 5, 5))),
                              basis=basis)
    est = ModelParams(gt.mu, np.ones((5, 5, 5)))
    assert relative_error_phi(est, basis, basis_truth) == 0.0
    with pytest.raises(ValueError):
        relative_error_phi(est, basis, basis_truth, grid_step=0.0)


@given(st.floats(0.0, 1.0), st.integers(0, 1000))
def test_phi_error_affine_along_line(lam, seed):
    rng = np.random.default_rng(seed)
    grid = np.linspace(0, 5, 501)
    truth = rng.uniform(0.1, 1.0, (3, 501))
    other = rng.uniform(0.0, 2.0, (3, 501))
    est = truth + lam * (other - truth)
    full = relative_kernel_error(other, truth, grid)
    assert relative_kernel_error(est, truth, grid) == pytest.approx(lam * full, rel=1e-12, abs=1e-15)
    mirrored = truth - (est - truth)
    assert relative_kernel_error(mirrored, truth, grid) == pytest.approx(
        relative_kernel_error(est, truth, grid), rel=1e-12, abs=1e-15)


def test_phi_error_grid_convergence():
    data, gt = make_synthetic(40, seed=2)
    basis = select_basis(data)
    params, _ = fit(data, basis, LearnConfig(outer_max=1, inner_max=20))
    coarse = relative_error_phi(params, basis, gt)
    fine = relative_error_phi(params, basis, gt, grid_step=basis.horizon / 4000)
    assert abs(coarse - fine) < 0.01 * fine


def test_phi_pairs_exclude_zero_mass():
    _, gt = make_synthetic(0, seed=1)
    basis = BasisConfig.uniform(5, 50.0, 5.0)
    rows = phi_error_pairs(ModelParams(gt.mu, np.zeros((5, 5, 5))), basis, gt)
    assert len(rows) == 25
    assert sum(r["relative_error"] is None for r in rows) == 6


def test_score_graph_examples():
    truth = np.ones((5, 5), bool)
    truth[4, :3] = truth[:3, 4] = False
    t = GrangerGraph(truth)
    s = score_graph(t, t)
    assert (s.precision, s.recall, s.f1, s.absent_f1, s.absent_recovered) == (1, 1, 1, 1, 6)
    s = score_graph(GrangerGraph(np.ones((5, 5), bool)), t)
    assert s.recall == 1.0 and s.precision == pytest.approx(19 / 25)
    assert s.absent_recovered == 0 and s.absent_recall == 0.0
    s = score_graph(GrangerGraph(np.zeros((5, 5), bool)), t)
    assert s.recall == 0.0 and s.f1 == 0.0
    with pytest.raises(ValueError):
        score_graph(GrangerGraph(np.ones((4, 4), bool)), t)


@given(st.integers(0, 10_000))
def test_score_graph_f1_consistency_and_relabeling(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random((5, 5)) < 0.6, rng.random((5, 5)) < 0.6
    s = score_graph(GrangerGraph(a), GrangerGraph(b))
    if s.precision + s.recall > 0:
        assert s.f1 == pytest.approx(2 * s.precision * s.recall / (s.precision + s.recall))
    perm = rng.permutation(5)
    s2 = score_graph(GrangerGraph(a[np.ix_(perm, perm)]), GrangerGraph(b[np.ix_(perm, perm)]))
    assert s2 == s


def test_evaluate_report_and_threshold_sweep():
    data, gt = make_synthetic(30, seed=6)
    basis = select_basis(data)
    params, _ = fit(data, basis, LearnConfig(1.0, 5.0, outer_max=3))
    rep = evaluate(params, basis, gt, data)
    d = rep.to_dict()
    assert "pairs" not in d and len(rep.pairs) == 25
    assert d["e_mu"] >= 0 and d["e_phi"] >= 0 and 0 <= d["edge_f1"] <= 1
    assert d["loglike_test"] == pytest.approx(loglike_test(params, basis, data))
    rows = threshold_sweep(params, gt.graph())
    assert rows[0]["threshold"] == 0.0
    assert all(0 <= r["precision"] <= 1 and 0 <= r["recall"] <= 1 for r in rows)
    recalls = [r["recall"] for r in rows]
    assert recalls == sorted(recalls, reverse=True)
