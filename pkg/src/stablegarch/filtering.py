"""
Observable volatility filter and its parameter gradient.

``filter_h`` evaluates the recursion

    h_t = alpha_0 + sum_{i <= min(p, t-1)} alpha_i X_{t-i}^2 + sum_j beta_j h_{t-j},

with ``h_t = alpha_0 / (1 - sum(beta))`` for ``t <= 0`` and zero presample
observations.  The same values follow from the power-series expansion of
``alpha(z) / beta(z)`` (``psi_coefficients`` / ``h_hat_via_psi``), which the
tests use as an independent check.

Gradient components are ordered ``(d/d alpha_0, ..., d/d alpha_p,
d/d beta_1, ..., d/d beta_q)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .garch import GarchParams, GarchPath

__all__ = [
    "FilterOutput",
    "run_filter",
    "filter_h",
    "filter_gradient",
    "psi_coefficients",
    "psi_tail_bound",
    "h_hat_via_psi",
    "h_hat_series_via_psi",
    "stationary_filter",
    "presample_gradient",
]


@dataclass(frozen=True)
class FilterOutput:
    h: np.ndarray
    grad: np.ndarray


def _as_series(x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("observation series must be a non-empty 1-d array")
    if not np.all(np.isfinite(x)):
        raise ValueError("observation series contains non-finite values")
    return x


def presample_gradient(params: GarchParams) -> np.ndarray:
    """Derivative of the constant presample value ``alpha_0 / (1 - sum(beta))``."""
    b = params.beta_sum
    g0 = np.zeros(params.dim)
    g0[0] = 1.0 / (1.0 - b)
    g0[params.p + 1 :] = params.alpha[0] / (1.0 - b) ** 2
    return g0


def filter_h(x, params: GarchParams) -> np.ndarray:
    """Filtered squared volatilities ``h_1, ..., h_n``."""
    x = _as_series(x)
    h0 = params.fixed_point()
    return _kernels.filter_h(params.alpha_array, params.beta_array, x * x, h0)


def run_filter(x, params: GarchParams) -> FilterOutput:
    x = _as_series(x)
    h0 = params.fixed_point()
    h, g = _kernels.filter_h_grad(
        params.alpha_array, params.beta_array, x * x, h0, presample_gradient(params)
    )
    return FilterOutput(h=h, grad=g)


def filter_gradient(x, params: GarchParams) -> np.ndarray:
    """Gradient of ``filter_h`` with respect to theta, shape ``(n, p+q+1)``."""
    return run_filter(x, params).grad


def psi_coefficients(params: GarchParams, J: int) -> np.ndarray:
    """
    Coefficients ``psi_1, ..., psi_J`` of ``alpha(z) / beta(z)``.

    ``psi_j = alpha_j [j <= p] + sum_{i=1}^{min(j-1, q)} beta_i psi_{j-i}``.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    if params.beta_sum >= 1:
        raise ValueError("sum(beta) >= 1: the series for alpha(z)/beta(z) need not converge")
    psi = np.zeros(J + 1)
    for j in range(1, J + 1):
        s = params.alpha[j] if j <= params.p else 0.0
        for i in range(1, min(j - 1, params.q) + 1):
            s += params.beta[i - 1] * psi[j - i]
        psi[j] = s
    return psi[1:]


def psi_tail_bound(params: GarchParams, j: int) -> float:
    """
    Upper bound on ``psi_j`` for ``j > p``.

    Past lag ``p`` the recursion is a convex-type combination with total
    weight ``B = sum(beta) < 1``, so the running maximum over ``q``
    consecutive coefficients shrinks by ``B`` every ``q`` steps:
    ``psi_j <= m_p * B**ceil((j - p) / q)`` with ``m_p`` the largest of
    ``psi_{p-q+1}, ..., psi_p``.
    """
    p, q = params.p, params.q
    if j <= p:
        raise ValueError("bound applies for j > p")
    if q == 0:
        return 0.0
    psi = psi_coefficients(params, p)
    m_p = float(np.max(psi[max(p - q, 0) : p]))
    return m_p * params.beta_sum ** math.ceil((j - p) / q)


def h_hat_via_psi(x, params: GarchParams, t: int, J: int | None = None) -> float:
    """
    ``alpha_0 / beta(1) + sum_{j=1}^{t-1} psi_j X_{t-j}^2`` at 1-based time ``t``.

    ``J`` truncates the sum; the default uses all ``t - 1`` terms (exact).
    """
    x = _as_series(x)
    if not 1 <= t <= x.size:
        raise ValueError(f"t must lie in [1, {x.size}]")
    base = params.alpha[0] / (1.0 - params.beta_sum)
    m = t - 1 if J is None else min(J, t - 1)
    if m == 0:
        if params.beta_sum >= 1:
            raise ValueError("sum(beta) >= 1")
        return base
    psi = psi_coefficients(params, m)
    lagged = x[t - 2 :: -1][:m]  # X_{t-1}, X_{t-2}, ...
    return base + float(np.dot(psi, lagged * lagged))


def h_hat_series_via_psi(x, params: GarchParams) -> np.ndarray:
    """All ``t = 1..n`` at once via a convolution with the psi sequence."""
    x = _as_series(x)
    n = x.size
    base = params.alpha[0] / (1.0 - params.beta_sum)
    if n == 1:
        return np.array([base])
    psi = psi_coefficients(params, n - 1)
    conv = np.convolve(x * x, psi)[: n - 1]
    return np.concatenate([[base], base + conv])


def stationary_filter(path: GarchPath, params_true: GarchParams) -> tuple[np.ndarray, np.ndarray]:
    """
    ``h_t(theta_0)`` and ``h'_t(theta_0)`` on a simulated path.

    The recursion is rerun from the start of the burn-in, so it uses the same
    presample as the simulation and reproduces ``path.sigma2``; after the
    burn-in the gradient has forgotten its initialization.
    """
    if params_true != path.params_used:
        raise ValueError("params_true differs from the parameters that generated the path")
    x_full, _, _ = path.full()
    out = run_filter(x_full, params_true)
    b = path.burn_in
    return out.h[b:], out.grad[b:]
