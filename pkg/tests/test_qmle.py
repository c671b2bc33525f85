import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numba import njit

from stablegarch import GarchParams, Gaussian, SeedSpec, StudentT, simulate
from stablegarch.filtering import stationary_filter
from stablegarch.qmle import (
    CompactSetK,
    OptimizerSettings,
    _Objective,
    fit,
    likelihood_gradient,
    log_likelihood,
)

K11 = CompactSetK(1, 1)
THETA0 = GarchParams((0.1, 0.1), (0.8,))


def naive_loglik(x, alpha, beta):
    """Straight-line evaluation with explicit presample lists."""
    p, q = len(alpha) - 1, len(beta)
    h0 = alpha[0] / (1 - sum(beta))
    xs = [0.0] * p + [float(v) for v in x]
    hs = [h0] * q
    total = 0.0
    for t in range(len(x)):
        h = alpha[0]
        for i in range(1, p + 1):
            h += alpha[i] * xs[p + t - i] ** 2
        for j in range(1, q + 1):
            h += beta[j - 1] * hs[q + t - j]
        hs.append(h)
        total += -0.5 * (x[t] ** 2 / h + math.log(h))
    return total


def test_compact_set_validation():
    with pytest.raises(ValueError):
        CompactSetK(1, 3, m=0.4, beta_bar=0.95)
    with pytest.raises(ValueError):
        CompactSetK(1, 1, m=1.0, M=0.5)
    with pytest.raises(ValueError):
        CompactSetK(1, 1, beta_bar=1.0)
    K = CompactSetK(2, 2)
    assert K.contains([0.1, 0.1, 0.1, 0.4, 0.5])
    assert not K.contains([0.1, 0.1, 0.1, 0.5, 0.5])
    assert not K.contains([0.001, 0.1, 0.1, 0.4, 0.5])


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 3), st.integers(0, 3),
       st.lists(st.floats(-10, 10, allow_nan=False), min_size=7, max_size=7))
def test_projection_is_feasible_and_idempotent(p, q, raw):
    K = CompactSetK(p, q)
    theta = np.array(raw[: p + q + 1])
    th = K.project(theta)
    assert K.contains(th)
    np.testing.assert_allclose(K.project(th), th, rtol=0, atol=1e-12)


def test_projection_keeps_beta_above_lower_bound():
    K = CompactSetK(1, 3, m=0.01, beta_bar=0.95)
    th = K.project([0.1, 0.1, 2.0, 0.01, 0.01])
    assert th[2:].min() >= 0.01
    assert th[2:].sum() == pytest.approx(0.95, abs=1e-14)


def test_log_likelihood_single_term():
    assert log_likelihood(np.array([2.0]), GarchParams((0.5, 0.3), (0.5,))) == pytest.approx(-2.0)


def test_log_likelihood_zero_series():
    th = GarchParams((0.2, 0.3), (0.3, 0.2))
    n = 40
    assert log_likelihood(np.zeros(n), th) == pytest.approx(-(n / 2) * math.log(0.2 / 0.5), rel=1e-14)


def test_log_likelihood_matches_naive_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        p, q = rng.integers(1, 4), rng.integers(0, 4)
        alpha = [rng.uniform(0.05, 1)] + list(rng.uniform(0, 0.3, p))
        beta = list(rng.dirichlet(np.ones(q)) * 0.9) if q else []
        x = rng.standard_normal(150) * 1.5
        got = log_likelihood(x, GarchParams(tuple(alpha), tuple(beta)))
        assert got == pytest.approx(naive_loglik(x, alpha, beta), rel=1e-12)


def test_likelihood_gradient_finite_differences():
    rng = np.random.default_rng(2)
    for _ in range(20):
        p, q = rng.integers(1, 4), rng.integers(1, 4)
        theta = np.concatenate([[rng.uniform(0.05, 1)], rng.uniform(0.02, 0.3, p),
                                rng.dirichlet(np.ones(q)) * 0.85])
        th = GarchParams.from_theta(theta, p, q)
        x = rng.standard_normal(300)
        g = likelihood_gradient(x, th)
        for i in range(theta.size):
            e = 1e-6 * (1 + abs(theta[i]))
            up, dn = theta.copy(), theta.copy()
            up[i] += e
            dn[i] -= e
            fd = (log_likelihood(x, GarchParams.from_theta(up, p, q))
                  - log_likelihood(x, GarchParams.from_theta(dn, p, q))) / (2 * e)
            assert abs(g[i] - fd) <= 1e-5 * max(abs(fd), 1.0)


def test_likelihood_gradient_zero_series():
    th = GarchParams((0.4, 0.2), (0.5,))
    n = 25
    assert likelihood_gradient(np.zeros(n), th)[0] == pytest.approx(-n / (2 * 0.4), rel=1e-13)


def test_score_at_truth_is_centered():
    path = simulate(THETA0, Gaussian(), 100_000, seed=SeedSpec(3))
    g = likelihood_gradient(path.x, THETA0) / path.n
    h, hp = stationary_filter(path, THETA0)
    terms = 0.5 * hp / h[:, None] * (path.z**2 - 1)[:, None]
    se = terms.std(axis=0) / math.sqrt(path.n)
    assert np.all(np.abs(g) <= 3 * se)


def test_fit_requires_enough_data():
    with pytest.raises(ValueError):
        fit(np.ones(100), K11)


def test_start_points():
    starts = K11.start_points(5)
    assert len(starts) == 5
    assert all(K11.contains(s) for s in starts)
    np.testing.assert_allclose(starts[0], K11.centroid())
    assert len({tuple(s) for s in starts}) == 5
    with pytest.raises(ValueError):
        OptimizerSettings(n_starts=3)


def test_fit_feasible_reproducible_and_monotone():
    path = simulate(THETA0, StudentT(3), 3000, seed=SeedSpec(4))
    trace: dict[int, list[float]] = {}
    res = fit(path.x, K11, callback=lambda i, it, th, ll: trace.setdefault(i, []).append(ll))
    assert K11.contains(res.theta_hat.theta)
    assert res.converged and res.starts_used == 5
    for s in res.starts:
        lls = [s.loglik_start] + trace.get(res.starts.index(s), [])
        assert all(b >= a for a, b in zip(lls, lls[1:]))
    again = fit(path.x, K11)
    assert again.theta_hat == res.theta_hat and again.loglik == res.loglik
    assert res.loglik == pytest.approx(log_likelihood(path.x, res.theta_hat), rel=1e-13)


def test_fit_random_starts_reproducible():
    path = simulate(THETA0, Gaussian(), 2000, seed=SeedSpec(5))
    opts = OptimizerSettings(random_starts=2)
    a = fit(path.x, K11, opts, SeedSpec(1))
    b = fit(path.x, K11, opts, SeedSpec(1))
    assert a.starts_used == 7 and a.theta_hat == b.theta_hat


@njit(cache=True)
def _grid_max(x2, grid_a, grid_b):
    best = -np.inf
    n = x2.shape[0]
    for a0 in grid_a:
        for a1 in grid_a:
            for b1 in grid_b:
                h = a0 / (1.0 - b1)
                hprev = h
                xprev = 0.0
                ll = 0.0
                for t in range(n):
                    h = a0 + a1 * xprev + b1 * hprev
                    ll -= 0.5 * (x2[t] / h + np.log(h))
                    hprev = h
                    xprev = x2[t]
                if ll > best:
                    best = ll
    return best


@pytest.mark.slow
def test_fit_beats_brute_force_grid_on_tiny_instance():
    path = simulate(THETA0, Gaussian(), 200, seed=SeedSpec(6))
    res = fit(path.x, K11)
    grid_a = np.round(np.arange(0.01, 5.0 + 1e-9, 0.01), 10)
    grid_b = np.round(np.arange(0.01, 0.95 + 1e-9, 0.01), 10)
    assert res.loglik >= _grid_max(path.x**2, grid_a, grid_b) - 1e-3


@pytest.mark.slow
@pytest.mark.parametrize("model,tol,share", [(Gaussian(), 0.05, 0.95), (StudentT(3), 0.1, 0.90)])
def test_fit_consistency(model, tol, share):
    hits = 0
    for r in range(100):
        path = simulate(THETA0, model, 20_000, seed=SeedSpec(7, r), check_stationarity=False)
        res = fit(path.x, K11)
        hits += np.max(np.abs(res.theta_hat.theta - THETA0.theta)) < tol
    assert hits >= share * 100


def test_boundary_truth_still_returns_point_in_K():
    th = GarchParams((0.1, 0.01), (0.94,))
    path = simulate(th, Gaussian(), 1000, seed=SeedSpec(8))
    res = fit(path.x, K11)
    assert K11.contains(res.theta_hat.theta)


def test_degenerate_data_warns():
    res = fit(np.zeros(500), K11)
    assert res.warning is not None and "degenerate" in res.warning
    assert res.converged
    assert res.theta_hat.alpha[0] == pytest.approx(K11.m, abs=1e-9)
    assert K11.contains(res.theta_hat.theta)


def test_no_improvement_reports_failure(monkeypatch):
    monkeypatch.setattr(_Objective, "value", lambda self, theta: 0.0)
    path = simulate(THETA0, Gaussian(), 500, seed=SeedSpec(9))
    res = fit(path.x, K11)
    assert not res.converged
    assert "no start improved" in res.warning
