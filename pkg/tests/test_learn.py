import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hawkesgc.basis import BasisConfig, select_basis
from hawkesgc.core import excitation_stats, log_likelihood
from hawkesgc.learn import (LearnConfig, e_step, fit, pair_responsibilities, penalized_objective,
                            prox_group, smooth_gradient, smooth_objective, soft_threshold,
                            solve_update_quadratic, surrogate_objective, update_A, update_mu)
from hawkesgc.model import ClusterStructure, Dataset, EventSequence, ModelParams
from hawkesgc.simulate import GroundTruth, make_synthetic, sample_many

from helpers import projected_gradient_prox, prox_objective, random_instance


def small_fit_data(seed=0, num=30):
    return make_synthetic(num, 30.0, seed=seed)


def test_e_step_examples():
    rng = np.random.default_rng(0)
    params, basis, data = random_instance(rng, num_seq=2)
    zero_A = ModelParams(params.mu, np.zeros_like(params.A))
    r = e_step(zero_A, basis, data)
    np.testing.assert_allclose(r.baseline, 1.0, rtol=1e-15)
    assert not r.attributed.any()
    # mu = 0 with positive excitation at every event except the first
    b = BasisConfig(np.array([0.0]), 1.0, 5.0)
    data = Dataset((EventSequence([1.0, 2.0], [0, 0], 5.0),), 1)
    p = ModelParams([0.0], [[[0.5]]])
    with np.errstate(invalid="ignore"):
        base, pairs = pair_responsibilities(p, b, data[0])
    assert math.isnan(base[0])  # first event has zero intensity
    assert base[1] == 0.0 and pairs[1, 0, 0] == pytest.approx(1.0)


def test_e_step_two_event_hand_value():
    b = BasisConfig(np.array([0.0]), 1.0, 5.0)
    data = Dataset((EventSequence([1.0, 2.5], [0, 0], 5.0),), 1)
    p = ModelParams([0.4], [[[0.7]]])
    r = e_step(p, b, data)
    k = math.exp(-1.5 ** 2 / 2)
    assert r.baseline[1] == pytest.approx(0.4 / (0.4 + 0.7 * k))
    assert r.attributed[0, 0, 0] == pytest.approx(0.7 * k / (0.4 + 0.7 * k))


def test_e_step_zero_intensity_error():
    b = BasisConfig(np.array([0.0]), 1.0, 5.0)
    data = Dataset((EventSequence([1.0], [0], 5.0),), 1)
    with pytest.raises(ValueError):
        e_step(ModelParams([0.0], [[[1.0]]]), b, data)


@given(st.integers(0, 10_000))
def test_responsibilities_normalised_and_consistent(seed):
    rng = np.random.default_rng(seed)
    params, basis, data = random_instance(rng, num_seq=2)
    r = e_step(params, basis, data)
    assert np.allclose(r.baseline + r.excited, 1.0, atol=1e-12, rtol=0)
    attributed = np.zeros_like(params.A)
    offset = 0
    for seq in data:
        base, pairs = pair_responsibilities(params, basis, seq)
        n = len(seq)
        np.testing.assert_allclose(base, r.baseline[offset:offset + n], rtol=1e-12)
        np.testing.assert_allclose(base + pairs.sum(axis=(1, 2)), 1.0, atol=1e-12)
        for i in range(n):
            for j in range(i):
                attributed[seq.types[i], seq.types[j]] += pairs[i, j]
        offset += n
    np.testing.assert_allclose(r.attributed, attributed, rtol=1e-10, atol=1e-14)


def test_update_mu_examples():
    b = BasisConfig(np.array([0.0]), 1.0, 10.0)
    data = Dataset((EventSequence([3.0], [0], 10.0),), 2)
    r = e_step(ModelParams([1.0, 1.0], np.zeros((2, 2, 1))), b, data)
    mu = update_mu(r, data)
    assert mu[0] == pytest.approx(0.1) and mu[1] == 0.0
    # three type-2 events with p_ii = (1, .5, .5) over total time 10
    data = Dataset((EventSequence([1.0, 2.0], [1, 1], 5.0), EventSequence([4.0], [1], 5.0)), 2)
    r = e_step(ModelParams([1.0, 1.0], np.zeros((2, 2, 1))), b, data)
    r.baseline_by_type[:] = [0.0, 2.0]
    assert update_mu(r, data)[1] == pytest.approx(0.2)


def test_quadratic_root_examples():
    assert solve_update_quadratic(1.0, 2.0, 0.0) == 0.0
    assert solve_update_quadratic(0.0, 1.0, -2.0) == pytest.approx(2.0)
    assert solve_update_quadratic(1.0, 0.0, -4.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        solve_update_quadratic(0.0, 0.0, -1.0)
    with pytest.raises(ValueError):
        solve_update_quadratic(0.0, -1.0, -1.0)
    with pytest.raises(ValueError):
        solve_update_quadratic(0.0, 5e-324, -1.0)


@given(st.floats(0, 1e6, allow_subnormal=False), st.floats(-1e6, 1e6, allow_subnormal=False),
       st.floats(-1e6, 0, allow_subnormal=False))
def test_quadratic_root_is_root(a, b, c):
    if a == 0 and b <= 0 and c < 0:
        return
    x = float(solve_update_quadratic(a, b, c))
    assert x >= 0
    scale = max(abs(a) * x * x, abs(b) * x, abs(c), 1e-300)
    if c < 0 or x > 0:
        assert abs(a * x * x + b * x + c) <= 1e-9 * scale or x == np.finfo(float).tiny


@given(st.integers(0, 10_000), st.sampled_from(["none", "s", "g", "p", "all"]))
def test_update_A_minimises_surrogate(seed, which):
    """Each coordinate of the update is a stationary point of the MM surrogate."""
    rng = np.random.default_rng(seed)
    params, basis, data = random_instance(rng, max_events=8, max_types=3, num_seq=3)
    U = params.num_types
    cl = ClusterStructure(((0, 1),) + tuple((u,) for u in range(2, U)), U) if U >= 2 else None
    ws = dict(none=(0, 0, 0), s=(0.3, 0, 0), g=(0, 0.4, 0), p=(0, 0, 2.0), all=(0.3, 0.4, 2.0))
    a_s, a_g, a_p = ws[which]
    if cl is None:
        a_p = 0
    cfg = LearnConfig(a_s, a_g, a_p, cl if a_p else None)
    stats = excitation_stats(data, basis)
    r = e_step(params, basis, data, stats)
    A = update_A(r, data, basis, params, cfg, stats=stats)
    assert np.all(A >= 0)
    norms = np.linalg.norm(params.A, axis=2)

    def coord_objective(u, v, m, x):
        B = A.copy()
        B[u, v, m] = x
        major = (B[u, v] ** 2).sum() / (2 * norms[u, v]) if norms[u, v] > 0 else 0.0
        return (smooth_objective(B, r, stats, params.A, cfg) + a_s * B.sum()
                + a_g * major)

    for _ in range(5):
        u, v, m = (int(rng.integers(0, U)), int(rng.integers(0, U)),
                   int(rng.integers(0, basis.M)))
        x = A[u, v, m]
        f0 = coord_objective(u, v, m, x)
        for dx in (1e-4, -1e-4):
            if x + dx * max(x, 1e-3) >= 0:
                assert coord_objective(u, v, m, x + dx * max(x, 1e-3)) >= f0 - 1e-9 * abs(f0)


def test_update_A_holds_zero_groups():
    rng = np.random.default_rng(1)
    params, basis, data = random_instance(rng, max_types=2, num_seq=3)
    A = params.A.copy()
    A[0, 0] = 0
    p = ModelParams(params.mu, A)
    r = e_step(p, basis, data)
    out = update_A(r, data, basis, p, LearnConfig(alpha_g=1.0))
    assert not out[0, 0].any()


def test_soft_threshold_examples():
    np.testing.assert_array_equal(soft_threshold([5.0, -5.0, 1.0], 2.0), [3.0, -3.0, 0.0])


def test_prox_examples():
    cfg = LearnConfig(alpha_s=0.0, alpha_g=1.0)
    out = prox_group(np.array([3.0, 4.0]), np.zeros(2), cfg, eta=1.0)
    np.testing.assert_allclose(out, [2.4, 3.2])
    # norm exactly eta * alpha_g: all-zero, bitwise
    out = prox_group(np.array([3.0, 4.0]), np.zeros(2), LearnConfig(alpha_g=5.0), eta=1.0)
    assert np.array_equal(out, np.zeros(2)) and not np.signbit(out).any()
    with pytest.raises(ValueError):
        prox_group(np.ones(2), np.zeros(2), cfg)


def test_prox_uses_gradient_step():
    cfg = LearnConfig(alpha_g=1.0)
    out = prox_group(np.array([3.5, 4.5]), np.array([1.0, 1.0]), cfg, eta=0.5)
    np.testing.assert_allclose(out, (1 - 0.5 / 5.0) * np.array([3.0, 4.0]))


@given(st.integers(0, 10_000))
def test_prox_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(0, 2, (8, 5))
    eta, a_s, a_g = rng.uniform(0.1, 1, 8), rng.uniform(0, 1, 8), rng.uniform(0, 3, 8)
    best, best_val = projected_gradient_prox(v, eta, a_s, a_g)
    for k in range(8):
        got = prox_group(v[k], np.zeros(5), LearnConfig(a_s[k], a_g[k]), eta=eta[k])
        assert prox_objective(got, v[k], eta[k], a_s[k], a_g[k]) <= best_val[k] + 1e-12
        np.testing.assert_allclose(got, best[k], atol=1e-6)


@given(st.integers(0, 10_000))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    params, basis, data = random_instance(rng, max_events=8, num_seq=3)
    U = params.num_types
    cl = ClusterStructure(((tuple(range(U))),), U)
    cfg = LearnConfig(0.1, 0.2, 3.0, cl)
    stats = excitation_stats(data, basis)
    r = e_step(params, basis, data, stats)
    A = rng.uniform(0.05, 1.0, params.A.shape)
    ref = params.A
    g = smooth_gradient(A, r, stats, ref, cfg)
    h = 1e-5
    for _ in range(4):
        idx = tuple(int(rng.integers(0, n)) for n in A.shape)
        Ap, Am = A.copy(), A.copy()
        Ap[idx] += h
        Am[idx] -= h
        fd = (smooth_objective(Ap, r, stats, ref, cfg) - smooth_objective(Am, r, stats, ref, cfg)) / (2 * h)
        assert abs(fd - g[idx]) <= 1e-4 * max(abs(g[idx]), 1.0)


def test_em_monotone_for_mle():
    data, _ = small_fit_data(1, 20)
    basis = select_basis(data)
    params, rep = fit(data, basis, LearnConfig(inner_max=60, outer_max=1, inner_tol=0))
    ll = np.array(rep.loglike)
    assert len(ll) == 60
    assert np.all(np.diff(ll) >= -1e-9 * np.abs(ll[:-1]))
    assert rep.final_loglike == pytest.approx(log_likelihood(params, basis, data))


def test_surrogate_nonincreasing_with_penalties():
    data, _ = small_fit_data(2, 20)
    basis = select_basis(data)
    cl = ClusterStructure(((0, 1, 2), (3, 4)), 5)
    _, rep = fit(data, basis, LearnConfig(10, 100, 1000, cl, outer_max=3))
    assert min(rep.surrogate_decrease) >= -1e-9 * max(abs(x) for x in rep.objective)


def test_fit_poisson_rate():
    gt = GroundTruth([2.0], "sine", [[0.0]], [[1.0]], [[0.0]])
    data = sample_many(gt, 10, 10.0, 5)
    basis = BasisConfig.uniform(3, 10.0, 1.0)
    init = ModelParams([1.0], np.zeros((1, 1, 3)))
    params, rep = fit(data, basis, LearnConfig(), init=init)
    assert not params.A.any()
    assert params.mu[0] == pytest.approx(data.total_events / data.total_time, rel=1e-8)
    assert abs(params.mu[0] - 2.0) < 4 * math.sqrt(2.0 / 100)


def test_huge_group_weight_zeroes_everything():
    data, _ = small_fit_data(3, 20)
    basis = select_basis(data)
    params, rep = fit(data, basis, LearnConfig(alpha_g=1e8))
    assert np.array_equal(params.A, np.zeros_like(params.A))
    np.testing.assert_allclose(params.mu, data.type_counts() / data.total_time, rtol=1e-9)
    assert rep.zero_groups == 25 and rep.converged


def test_pairwise_similarity_pulls_rows_together():
    data, _ = small_fit_data(4, 25)
    basis = select_basis(data)
    cl = ClusterStructure(((0, 1), (2,), (3,), (4,)), 5)
    gaps = []
    for a_p in (0.0, 10.0, 1000.0):
        cfg = LearnConfig(alpha_p=a_p, clusters=cl if a_p else None, outer_max=1)
        params, _ = fit(data, basis, cfg)
        gaps.append(np.linalg.norm(params.A[0] - params.A[1]))
    assert gaps[0] > gaps[1] > gaps[2]


def test_fit_outputs_nonnegative_and_exact_zeros():
    data, _ = small_fit_data(5, 30)
    basis = select_basis(data)
    cl = ClusterStructure(((0, 1, 2), (3, 4)), 5)
    params, rep = fit(data, basis, LearnConfig(10, 100, 1000, cl, outer_max=5))
    assert np.all(params.A >= 0) and np.all(params.mu >= 0)
    norms = np.linalg.norm(params.A, axis=2)
    assert rep.zero_groups == int((norms == 0).sum()) > 0
    d = rep.to_dict()
    assert len(d["objective_trace"]) == sum(rep.inner_iterations)
    assert d["final_objective"] == pytest.approx(penalized_objective(
        params, excitation_stats(data, basis), LearnConfig(10, 100, 1000, cl)))


def test_fit_errors_and_config_validation():
    data, _ = small_fit_data(6, 5)
    basis = select_basis(data)
    with pytest.raises(ValueError):
        fit(Dataset((), 5), basis)
    with pytest.raises(ValueError):
        fit(data, basis, LearnConfig(alpha_p=1.0, clusters=ClusterStructure.singletons(3)))
    for bad in (dict(alpha_s=-1), dict(eta=0.0), dict(alpha_p=1.0), dict(inner_max=0)):
        with pytest.raises(ValueError):
            LearnConfig(**bad)
    with pytest.raises(ValueError):
        LearnConfig.for_method("MLE-XYZ")
    cfg = LearnConfig.for_method("MLE-SGL", clusters=ClusterStructure.singletons(5))
    assert cfg.alpha_p == 0 and cfg.clusters is None and cfg.alpha_g == 100


def test_fit_deterministic():
    data, _ = small_fit_data(7, 10)
    basis = select_basis(data)
    cfg = LearnConfig(1, 1, outer_max=2, seed=3)
    a, _ = fit(data, basis, cfg)
    b, _ = fit(data, basis, cfg)
    assert np.array_equal(a.A, b.A) and np.array_equal(a.mu, b.mu)


def test_surrogate_objective_matches_penalised_objective_terms():
    rng = np.random.default_rng(2)
    params, basis, data = random_instance(rng, num_seq=2)
    stats = excitation_stats(data, basis)
    r = e_step(params, basis, data, stats)
    cfg = LearnConfig(0.5, 0.5)
    # MM: F(theta) - F(theta_k) <= -(loglik(theta) - loglik(theta_k)) + penalty change
    other = ModelParams(params.mu * 1.1, params.A * 0.9)
    dF = (surrogate_objective(other, r, stats, params.A, cfg)
          - surrogate_objective(params, r, stats, params.A, cfg))
    dP = penalized_objective(other, stats, cfg) - penalized_objective(params, stats, cfg)
    assert dF >= dP - 1e-9


def test_line_search_prox_never_raises_objective():
    data, _ = small_fit_data(8, 30)
    basis = select_basis(data)
    stats = excitation_stats(data, basis)
    cl = ClusterStructure(((0, 1, 2), (3, 4)), 5)
    cfg = LearnConfig(10, 100, 1000, cl, outer_max=4, line_search=True)
    params, rep = fit(data, basis, cfg, stats=stats)
    assert len(rep.prox_steps) == rep.outer_iterations
    assert all(0 <= s <= rep.eta for s in rep.prox_steps)
    # final_objective is taken after the last sweep, objective[-1] just before it
    assert rep.final_objective <= rep.objective[-1] + 1e-9 * abs(rep.objective[-1])
    assert np.all(params.A >= 0)


def test_backtracking_prox_rejects_every_step_when_nothing_helps():
    from hawkesgc.learn import backtracking_prox
    rng = np.random.default_rng(3)
    params, basis, data = random_instance(rng, num_seq=2)
    stats = excitation_stats(data, basis)
    r = e_step(params, basis, data, stats)
    cfg = LearnConfig(0.1, 0.1)
    out, step = backtracking_prox(params, params, r, stats, cfg, 1e-3, max_halvings=0)
    assert out is params and step == 0.0
    out, step = backtracking_prox(params, params, r, stats, cfg, 1.0)
    assert step > 0
    assert penalized_objective(out, stats, cfg) <= penalized_objective(params, stats, cfg) + 1e-9
