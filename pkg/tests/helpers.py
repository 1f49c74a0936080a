"""Brute-force oracles shared by the test modules."""

import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize

from hawkesgc.basis import BasisConfig
from hawkesgc.core import intensity
from hawkesgc.model import Dataset, EventSequence, ModelParams


def quad_loglik(params, basis, data):
    """Sum of log intensities minus the compensator by adaptive quadrature."""
    total = 0.0
    for seq in data.sequences:
        for i, (t, u) in enumerate(zip(seq.times, seq.types)):
            lam = params.mu[u]
            for j in range(i):
                lam += float(basis.evaluate(t - seq.times[j]) @ params.A[u, seq.types[j]])
            total += math.log(lam)
        knots = np.unique(np.concatenate([[0.0], seq.times, [seq.horizon]]))
        for u in range(params.num_types):
            for a, b in zip(knots[:-1], knots[1:]):
                if b > a:
                    val, _ = quad(lambda s: intensity(params, basis, seq, u, s), a, b,
                                  epsabs=0.0, epsrel=1e-13, limit=200)
                    total -= val
    return total


def random_instance(rng, max_events=10, max_types=3, max_basis=4, num_seq=None):
    U = int(rng.integers(1, max_types + 1))
    M = int(rng.integers(1, max_basis + 1))
    T = float(rng.uniform(2.0, 10.0))
    basis = BasisConfig.uniform(M, T, float(rng.uniform(0.3, 2.0)))
    params = ModelParams(rng.uniform(0.05, 1.0, U), rng.uniform(0.0, 0.5, (U, U, M)))
    seqs = []
    for _ in range(num_seq or int(rng.integers(1, 3))):
        n = int(rng.integers(0, max_events + 1))
        seqs.append(EventSequence(np.sort(rng.uniform(0, T, n)), rng.integers(0, U, n), T))
    return params, basis, Dataset(tuple(seqs), U)


def prox_objective(a, v, eta, alpha_s, alpha_g):
    return (np.sum((a - v) ** 2, axis=-1) / (2 * eta) + alpha_s * a.sum(axis=-1)
            + alpha_g * np.linalg.norm(a, axis=-1))


def projected_gradient_prox(v, eta, alpha_s, alpha_g):
    """Batched argmin over a >= 0 of ``prox_objective``.

    Box-constrained quasi-Newton (L-BFGS-B) from the clipped input; the
    objective is smooth away from the origin, which is checked separately.
    ``v`` has shape (K, d); the weights broadcast as (K,).
    """
    v = np.asarray(v, dtype=float)
    K, d = v.shape
    eta, alpha_s, alpha_g = (np.broadcast_to(np.asarray(x, dtype=float), (K,))
                             for x in (eta, alpha_s, alpha_g))
    best = np.zeros_like(v)
    best_val = np.empty(K)
    for k in range(K):
        f = lambda a: prox_objective(a, v[k], eta[k], alpha_s[k], alpha_g[k])

        def grad(a):
            n = np.linalg.norm(a)
            return (a - v[k]) / eta[k] + alpha_s[k] + (alpha_g[k] * a / n if n > 0 else 0.0)

        start = np.maximum(v[k], 0.0) + 1e-3
        res = minimize(f, start, jac=grad, method="L-BFGS-B", bounds=[(0, None)] * d,
                       options=dict(ftol=1e-16, gtol=1e-13, maxiter=10_000))
        zero_val = f(np.zeros(d))
        if res.fun < zero_val:
            best[k], best_val[k] = res.x, res.fun
        else:
            best_val[k] = zero_val
    return best, best_val
