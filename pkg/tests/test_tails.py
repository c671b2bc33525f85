import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stablegarch import GarchParams, SeedSpec, StudentT, simulate
from stablegarch.filtering import stationary_filter
from stablegarch.tails import (
    breiman_ratio,
    default_k,
    empirical_spectral_measure,
    extremal_index_blocks,
    hill,
    hill_sweep,
)


def pareto(rng, alpha, n):
    return (1.0 - rng.random(n)) ** (-1.0 / alpha)


def test_hill_two_point_sample():
    c = 3.7
    assert hill(np.array([math.e * c, c]), k=1).alpha_hat == pytest.approx(1.0, rel=1e-15)


def test_hill_on_pareto():
    rep = hill(pareto(np.random.default_rng(1), 1.5, 100_000), k=1000)
    assert 1.35 <= rep.alpha_hat <= 1.65
    assert rep.ci_low < rep.alpha_hat < rep.ci_high
    assert rep.ci_high - rep.alpha_hat == pytest.approx(rep.alpha_hat * 1.96 / math.sqrt(1000))


def test_hill_scale_invariance_exact():
    x = pareto(np.random.default_rng(2), 2.0, 5000)
    for c in (0.125, 8.0, 2.0**40):
        assert hill(c * x, 100).alpha_hat == hill(x, 100).alpha_hat


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-6, 1e6), st.integers(0, 2**31))
def test_hill_scale_invariance_any_factor(c, seed):
    x = pareto(np.random.default_rng(seed), 1.5, 2000)
    assert hill(c * x, 50).alpha_hat == pytest.approx(hill(x, 50).alpha_hat, rel=1e-10)


def test_hill_errors_and_defaults():
    with pytest.raises(ValueError):
        hill(np.ones(10), k=3)
    with pytest.raises(ValueError):
        hill(np.array([1.0, 2.0]), k=2)
    assert default_k(100_000) == int(100_000**0.6)
    assert default_k(500) == 41
    assert default_k(50) == 5
    assert hill(pareto(np.random.default_rng(3), 1.5, 500)).k_used == 41
    sweep = hill_sweep(pareto(np.random.default_rng(3), 1.5, 5000))
    assert len(sweep) > 10 and all(r.alpha_hat > 0 for r in sweep)


def quantile_pareto(alpha, n):
    """Deterministic sample whose empirical tail is exactly Pareto at integer counts."""
    return ((np.arange(1, n + 1) - 0.5) / n) ** (-1.0 / alpha)


def test_breiman_degenerate_eta_exact():
    alpha, n = 1.5, 100_000
    xi = quantile_pareto(alpha, n)
    c = 4.0 ** (1 / alpha)  # c**alpha = 4
    # thresholds where n * x**-alpha is an integer: exactly N values of xi exceed x
    counts = np.array([50, 100, 500, 1000])
    x = (counts / n) ** (-1.0 / alpha)
    res = breiman_ratio(xi, np.full(n, c), alpha, x)
    np.testing.assert_array_equal(res.ratios, np.full(4, 4.0))
    assert res.eta_moment == pytest.approx(4.0, rel=1e-14)
    ones = breiman_ratio(xi, np.ones(n), alpha, x)
    np.testing.assert_array_equal(ones.ratios, 1.0)


def test_breiman_lognormal_monte_carlo():
    rng = np.random.default_rng(4)
    n, alpha = 1_000_000, 1.5
    xi = pareto(rng, alpha, n)
    eta = np.exp(0.25 * rng.standard_normal(n))
    x = np.quantile(xi, 0.999)
    res = breiman_ratio(xi, eta, alpha, [x])
    assert res.ratios[0] == pytest.approx(res.eta_moment, rel=0.10)


def test_breiman_flags_thresholds_above_max():
    xi = np.array([1.0, 2.0, 3.0])
    res = breiman_ratio(xi, np.ones(3), 1.0, [2.5, 10.0])
    assert res.valid.tolist() == [True, False] and np.isnan(res.ratios[1])
    with pytest.raises(ValueError):
        breiman_ratio(xi, -np.ones(3), 1.0, [1.0])


def _halfspace(g):
    g = np.asarray(g, dtype=float)
    return lambda u: np.abs(u @ g / np.linalg.norm(g)) > 1 - 1e-9


def test_spectral_measure_single_direction():
    rng = np.random.default_rng(5)
    n = 100_000
    g = np.array([0.6, 0.8])
    y1 = pareto(rng, 1.5, n) * rng.choice([-1.0, 1.0], n)
    v = y1[:, None] * g
    plus = lambda u: u @ g > 0.999
    minus = lambda u: u @ g < -0.999
    w = empirical_spectral_measure(v, 0.99, [plus, minus])
    m = int(np.sum(np.linalg.norm(v, axis=1) > np.quantile(np.linalg.norm(v, axis=1), 0.99)))
    se = math.sqrt(0.25 / m)
    assert abs(w[0] - 0.5) < 3 * se and w.sum() == 1.0


def test_spectral_measure_two_directions():
    rng = np.random.default_rng(6)
    n = 1_000_000
    g1, g2 = np.array([1.0, 0.0]), np.array([0.0, 2.0])
    pick = rng.random(n) < 0.5
    G = np.where(pick[:, None], g1, g2)
    y1 = pareto(rng, 1.5, n) * rng.choice([-1.0, 1.0], n)
    w = empirical_spectral_measure(G * y1[:, None], 0.99, [_halfspace(g1), _halfspace(g2)])
    assert w[1] / w[0] == pytest.approx(2**1.5, rel=0.15)


def test_spectral_measure_rotation_equivariance():
    rng = np.random.default_rng(7)
    v = rng.standard_t(2, (20_000, 3))
    # quadrant-type partition by the sign and size of coordinates
    sets = [lambda u: u[:, 0] > 0.5, lambda u: u[:, 1] > 0.5, lambda u: u[:, 2] > 0.5,
            lambda u: np.ones(u.shape[0], dtype=bool)]
    w = empirical_spectral_measure(v, 0.95, sets)
    perm, signs = np.array([2, 0, 1]), np.array([1.0, -1.0, 1.0])
    R = np.zeros((3, 3))
    R[np.arange(3), perm] = signs  # (R v)_i = signs_i * v_perm_i
    rotated = v @ R.T
    back = lambda f: (lambda u: f(u @ R))  # set membership of the pre-image
    w_rot = empirical_spectral_measure(rotated, 0.95, [back(f) for f in sets])
    np.testing.assert_array_equal(w_rot, w)
    assert w.sum() == 1.0


def test_spectral_measure_errors():
    v = np.ones((100, 2))
    with pytest.raises(ValueError):
        empirical_spectral_measure(v, 0.99, [lambda u: np.ones(u.shape[0], bool)])
    with pytest.raises(ValueError):
        empirical_spectral_measure(np.random.default_rng(0).standard_normal((100, 2)), 0.5,
                                   [lambda u: np.ones(u.shape[0], bool)])
    with pytest.raises(ValueError):
        empirical_spectral_measure(np.random.default_rng(0).standard_normal((100, 2)), 0.95,
                                   [lambda u: u[:, 0] > 2])


def test_extremal_index_iid():
    x = pareto(np.random.default_rng(8), 1.5, 100_000)
    assert 0.85 <= extremal_index_blocks(x, 100, 0.99) <= 1.0
    # plain ratio is biased towards (1 - 0.99**100) / 1 for independent data
    assert extremal_index_blocks(x, 100, 0.99, method="ratio") == pytest.approx(1 - 0.99**100, abs=0.03)


def test_extremal_index_max_pairs():
    rng = np.random.default_rng(9)
    eps = (-np.log(rng.random(100_001))) ** (-1 / 1.5)  # Frechet(1.5)
    y = np.maximum(eps[:-1], eps[1:])
    assert abs(extremal_index_blocks(y, 100, 0.99) - 0.5) <= 0.1


def test_extremal_index_garch_transform_positive():
    th = GarchParams((0.1, 0.1), (0.8,))
    path = simulate(th, StudentT(3), 32_000, seed=SeedSpec(10))
    h, grad = stationary_filter(path, th)
    gy = np.linalg.norm(grad / h[:, None] * (0.5 * (path.z**2 - 1))[:, None], axis=1)
    assert extremal_index_blocks(gy, 100, 0.99) > 0.05


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 50), st.floats(0.5, 0.999))
def test_extremal_index_in_unit_interval(seed, block, q):
    x = np.random.default_rng(seed).standard_t(2, 60 * block)
    for method in ("log", "ratio"):
        g = extremal_index_blocks(x, block, q, method=method)
        assert 0 < g <= 1


def test_extremal_index_errors():
    with pytest.raises(ValueError):
        extremal_index_blocks(np.ones(10_000), 100, 0.99)
    with pytest.raises(ValueError):
        extremal_index_blocks(np.arange(100.0), 100, 0.99)
    with pytest.raises(ValueError):
        extremal_index_blocks(np.arange(1000.0), 1, 0.99)
    with pytest.raises(ValueError):
        extremal_index_blocks(np.arange(1000.0), 2, 0.99, method="runs")
