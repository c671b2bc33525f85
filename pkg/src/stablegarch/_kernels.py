"""Compiled GARCH recursions.  Arrays are 0-based in time; presample values are implicit."""

import numpy as np
from numba import njit


@njit(cache=True)
def simulate_path(alpha, beta, z, h0):
    """Run sigma2_t = a0 + sum a_i x_{t-i}^2 + sum b_j sigma2_{t-j}; returns (x, sigma2, bad)."""
    n = z.shape[0]
    p = alpha.shape[0] - 1
    q = beta.shape[0]
    x = np.zeros(n)
    sigma2 = np.zeros(n)
    for t in range(n):
        s = alpha[0]
        for i in range(1, p + 1):
            if t - i >= 0:
                s += alpha[i] * x[t - i] * x[t - i]
        for j in range(1, q + 1):
            if t - j >= 0:
                s += beta[j - 1] * sigma2[t - j]
            else:
                s += beta[j - 1] * h0
        if not np.isfinite(s):
            return x, sigma2, t
        sigma2[t] = s
        x[t] = np.sqrt(s) * z[t]
        if not np.isfinite(x[t]):
            return x, sigma2, t
    return x, sigma2, -1


@njit(cache=True)
def filter_h(alpha, beta, x2, h0):
    n = x2.shape[0]
    p = alpha.shape[0] - 1
    q = beta.shape[0]
    h = np.empty(n)
    for t in range(n):
        s = alpha[0]
        for i in range(1, p + 1):
            if t - i >= 0:
                s += alpha[i] * x2[t - i]
        for j in range(1, q + 1):
            if t - j >= 0:
                s += beta[j - 1] * h[t - j]
            else:
                s += beta[j - 1] * h0
        h[t] = s
    return h


@njit(cache=True)
def filter_h_grad(alpha, beta, x2, h0, g0):
    """Filter and its parameter gradient; ``g0`` is the presample gradient vector."""
    n = x2.shape[0]
    p = alpha.shape[0] - 1
    q = beta.shape[0]
    d = p + 1 + q
    h = np.empty(n)
    g = np.empty((n, d))
    for t in range(n):
        s = alpha[0]
        for i in range(1, p + 1):
            if t - i >= 0:
                s += alpha[i] * x2[t - i]
        for j in range(1, q + 1):
            if t - j >= 0:
                s += beta[j - 1] * h[t - j]
            else:
                s += beta[j - 1] * h0
        h[t] = s
        # direct partial derivatives
        g[t, 0] = 1.0
        for i in range(1, p + 1):
            g[t, i] = x2[t - i] if t - i >= 0 else 0.0
        for k in range(1, q + 1):
            g[t, p + k] = h[t - k] if t - k >= 0 else h0
        # propagation through the beta terms
        for j in range(1, q + 1):
            b = beta[j - 1]
            if t - j >= 0:
                for c in range(d):
                    g[t, c] += b * g[t - j, c]
            else:
                for c in range(d):
                    g[t, c] += b * g0[c]
    return h, g


@njit(cache=True)
def loglik(alpha, beta, x2, h0):
    """-1/2 sum(x2/h + log h); returns -inf if the filter leaves (0, inf)."""
    n = x2.shape[0]
    p = alpha.shape[0] - 1
    q = beta.shape[0]
    h = np.empty(n)
    ll = 0.0
    for t in range(n):
        s = alpha[0]
        for i in range(1, p + 1):
            if t - i >= 0:
                s += alpha[i] * x2[t - i]
        for j in range(1, q + 1):
            if t - j >= 0:
                s += beta[j - 1] * h[t - j]
            else:
                s += beta[j - 1] * h0
        if not (s > 0.0 and np.isfinite(s)):
            return -np.inf
        h[t] = s
        ll -= 0.5 * (x2[t] / s + np.log(s))
    return ll


@njit(cache=True)
def loglik_score_info(alpha, beta, x2, h0, g0):
    """Log-likelihood, its gradient and the scoring matrix 1/2 sum g g' / h^2."""
    h, g = filter_h_grad(alpha, beta, x2, h0, g0)
    n = x2.shape[0]
    d = g.shape[1]
    ll = 0.0
    score = np.zeros(d)
    info = np.zeros((d, d))
    for t in range(n):
        ht = h[t]
        ll -= 0.5 * (x2[t] / ht + np.log(ht))
        w = 0.5 * (x2[t] / ht - 1.0) / ht
        for a in range(d):
            ga = g[t, a]
            score[a] += w * ga
            ga_h = ga / ht
            for b in range(a, d):
                info[a, b] += 0.5 * ga_h * g[t, b] / ht
    for a in range(d):
        for b in range(a):
            info[a, b] = info[b, a]
    return ll, score, info
