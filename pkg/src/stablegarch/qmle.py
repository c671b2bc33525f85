"""
Gaussian quasi-maximum-likelihood estimation over a compact parameter set.

The objective is

    L(theta) = -1/2 sum_t ( X_t^2 / h_t(theta) + log h_t(theta) ),

with ``h_t`` the observable filter of :mod:`stablegarch.filtering`.  It is
maximized over

    K = { theta : m <= alpha_i, beta_j <= M,  sum(beta) <= beta_bar }

by projected ascent from a deterministic set of starting points.  Each step
is a Fisher-scoring direction (the gradient premultiplied by the inverse of
``1/2 sum h' h'^T / h^2``) pulled back into ``K`` and accepted by a
backtracking line search on the likelihood itself.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .filtering import _as_series, presample_gradient
from .garch import GarchParams
from .innovations import SeedSpec

__all__ = [
    "CompactSetK",
    "OptimizerSettings",
    "FitResult",
    "StartDiagnostics",
    "log_likelihood",
    "likelihood_gradient",
    "fit",
]

_ARMIJO = 1e-4
_MAX_HALVINGS = 60
_FEAS_TOL = 1e-12


@dataclass(frozen=True)
class CompactSetK:
    """Box ``[m, M]`` for every coordinate together with ``sum(beta) <= beta_bar``."""

    p: int
    q: int
    m: float = 0.01
    M: float = 5.0
    beta_bar: float = 0.95

    def __post_init__(self) -> None:
        if self.p < 1 or self.q < 0:
            raise ValueError("orders must satisfy p >= 1, q >= 0")
        if not 0 < self.m < self.M:
            raise ValueError(f"need 0 < m < M, got m={self.m}, M={self.M}")
        if not 0 < self.beta_bar < 1:
            raise ValueError(f"beta_bar must lie in (0, 1), got {self.beta_bar}")
        if not self.q * self.m < self.beta_bar:
            raise ValueError(f"K is empty: q*m = {self.q * self.m} >= beta_bar = {self.beta_bar}")

    @property
    def dim(self) -> int:
        return self.p + self.q + 1

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate ranges actually reachable inside ``K``."""
        lo = np.full(self.dim, self.m)
        hi = np.full(self.dim, self.M)
        if self.q:
            hi[self.p + 1 :] = min(self.M, self.beta_bar - (self.q - 1) * self.m)
        return lo, hi

    def project(self, theta) -> np.ndarray:
        """
        Map ``theta`` into ``K``.

        Coordinates are clipped to ``[m, M]``; if ``sum(beta)`` still exceeds
        ``beta_bar``, the parts of the ``beta_j`` above ``m`` are scaled down
        by a common factor so that the sum equals ``beta_bar``.
        """
        th = np.clip(np.asarray(theta, dtype=float), self.m, self.M)
        if self.q:
            b = th[self.p + 1 :]
            s = b.sum()
            if s > self.beta_bar:
                qm = self.q * self.m
                th[self.p + 1 :] = self.m + (b - self.m) * ((self.beta_bar - qm) / (s - qm))
        return th

    def contains(self, theta, tol: float = _FEAS_TOL) -> bool:
        th = np.asarray(theta, dtype=float)
        if th.shape != (self.dim,):
            return False
        ok = bool(np.all(th >= self.m - tol) and np.all(th <= self.M + tol))
        if self.q:
            ok = ok and th[self.p + 1 :].sum() <= self.beta_bar + tol
        return ok

    def interior(self, theta, margin: float = 0.0) -> bool:
        th = np.asarray(theta, dtype=float)
        if th.shape != (self.dim,):
            return False
        ok = bool(np.all(th > self.m + margin) and np.all(th < self.M - margin))
        if self.q:
            ok = ok and th[self.p + 1 :].sum() < self.beta_bar - margin
        return ok

    def centroid(self) -> np.ndarray:
        lo, hi = self.bounds()
        return self.project(0.5 * (lo + hi))

    def start_points(self, n_starts: int, shrink: float = 0.1) -> list[np.ndarray]:
        """
        Centroid, then box corners moved ``shrink`` of the way toward it.

        Corners are enumerated in binary order with the first coordinate as
        the most significant bit (0 = lower end); each is projected into K.
        """
        lo, hi = self.bounds()
        c = self.centroid()
        starts = [c]
        for bits in itertools.product((0, 1), repeat=self.dim):
            if len(starts) >= n_starts:
                break
            corner = np.where(np.array(bits) == 1, hi, lo)
            starts.append(self.project(c + (1.0 - shrink) * (corner - c)))
        return starts

    def to_dict(self) -> dict:
        return {"m": self.m, "M": self.M, "beta_bar": self.beta_bar, "p": self.p, "q": self.q}


@dataclass(frozen=True)
class OptimizerSettings:
    """
    Parameters
    ----------
    tol : float, optional
        Stop when the projected-gradient norm falls below this; ``None``
        means ``1e-6 * n``.
    max_iter : int
        Iteration cap per start.
    n_starts : int
        Number of grid starts (centroid plus shrunk corners), at least 5.
    random_starts : int
        Extra uniformly drawn starts, reproducible through the fit seed.
    """

    tol: float | None = None
    max_iter: int = 500
    n_starts: int = 5
    random_starts: int = 0

    def __post_init__(self) -> None:
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.n_starts < 5:
            raise ValueError("n_starts must be >= 5")
        if self.random_starts < 0:
            raise ValueError("random_starts must be >= 0")


@dataclass(frozen=True)
class StartDiagnostics:
    start: tuple[float, ...]
    theta: tuple[float, ...]
    loglik_start: float
    loglik: float
    iterations: int
    gradient_norm: float
    status: str


@dataclass(frozen=True)
class FitResult:
    theta_hat: GarchParams
    loglik: float
    iterations: int
    converged: bool
    gradient_norm: float
    starts_used: int
    warning: str | None = None
    starts: tuple[StartDiagnostics, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "theta_hat": self.theta_hat.to_dict(),
            "loglik": self.loglik,
            "iterations": self.iterations,
            "converged": self.converged,
            "gradient_norm": self.gradient_norm,
            "starts_used": self.starts_used,
            "warning": self.warning,
        }


def log_likelihood(x, params: GarchParams) -> float:
    """``-1/2 sum (X_t^2 / h_t + log h_t)``, without the ``2 pi`` constant."""
    x = _as_series(x)
    return float(_kernels.loglik(params.alpha_array, params.beta_array, x * x, params.fixed_point()))


def likelihood_gradient(x, params: GarchParams) -> np.ndarray:
    """``1/2 sum (h'_t / h_t) (X_t^2 / h_t - 1)``."""
    x = _as_series(x)
    _, score, _ = _kernels.loglik_score_info(
        params.alpha_array, params.beta_array, x * x, params.fixed_point(), presample_gradient(params)
    )
    return score


class _Objective:
    """Likelihood pieces on raw theta arrays; avoids rebuilding parameter objects."""

    def __init__(self, x2: np.ndarray, p: int, q: int) -> None:
        self.x2 = x2
        self.p = p
        self.q = q

    def _split(self, theta):
        a = np.ascontiguousarray(theta[: self.p + 1])
        b = np.ascontiguousarray(theta[self.p + 1 :])
        return a, b, 1.0 - b.sum()

    def value(self, theta) -> float:
        a, b, one_minus = self._split(theta)
        return _kernels.loglik(a, b, self.x2, a[0] / one_minus)

    def full(self, theta):
        a, b, one_minus = self._split(theta)
        g0 = np.zeros(theta.shape[0])
        g0[0] = 1.0 / one_minus
        g0[self.p + 1 :] = a[0] / one_minus**2
        return _kernels.loglik_score_info(a, b, self.x2, a[0] / one_minus, g0)


def _projected_gradient_norm(K: CompactSetK, theta, grad) -> float:
    gmax = float(np.max(np.abs(grad)))
    if gmax == 0.0:
        return 0.0
    eps = 1e-7 / gmax
    step = K.project(theta + eps * grad) - theta
    return float(np.linalg.norm(step) / eps)


def _ascend(obj: _Objective, K: CompactSetK, theta0, tol: float, max_iter: int, callback=None):
    theta = K.project(theta0)
    ll0 = obj.value(theta)
    ll, grad, info = obj.full(theta)
    pg = _projected_gradient_norm(K, theta, grad)
    it = 0
    status = "max_iter"
    d = theta.shape[0]
    while it < max_iter:
        if pg < tol:
            status = "converged"
            break
        ridge = 1e-10 * (np.trace(info) / d + 1.0)
        try:
            direction = np.linalg.solve(info + ridge * np.eye(d), grad)
        except np.linalg.LinAlgError:
            direction = grad.copy()
        accepted = False
        for dirn in (direction, None):
            if dirn is None:
                # plain projected gradient, first trial moves at most 0.1 in any coordinate
                dirn = grad * (0.1 / max(float(np.max(np.abs(grad))), 1e-300))
            t = 1.0
            for _ in range(_MAX_HALVINGS):
                cand = K.project(theta + t * dirn)
                delta = cand - theta
                if not np.any(delta):
                    break
                ll_c = obj.value(cand)
                if ll_c >= ll + _ARMIJO * max(float(grad @ delta), 0.0) and ll_c > ll:
                    accepted = True
                    break
                t *= 0.5
            if accepted:
                break
        if not accepted:
            status = "stalled"
            break
        theta = cand
        ll, grad, info = obj.full(theta)
        pg = _projected_gradient_norm(K, theta, grad)
        it += 1
        if callback is not None:
            callback(it, theta.copy(), float(ll))
    else:
        if pg < tol:
            status = "converged"
    return theta, float(ll), ll0, it, pg, status


def _degenerate(x2: np.ndarray, d: int) -> str | None:
    if np.count_nonzero(x2) < d:
        return "degenerate data: fewer nonzero observations than parameters; estimates sit at the lower bounds of K"
    if np.ptp(x2) <= 1e-12 * max(float(np.max(x2)), 1e-300):
        return "degenerate data: constant squared observations"
    return None


def fit(
    x,
    K: CompactSetK,
    opts: OptimizerSettings | None = None,
    seed: SeedSpec | None = None,
    callback=None,
) -> FitResult:
    """
    Maximize the quasi-likelihood over ``K``.

    Parameters
    ----------
    x : array_like
        Observations ``X_1, ..., X_n``, ``n >= 50 * (p + q + 1)``.
    K : CompactSetK
        Parameter set; also fixes the orders ``(p, q)``.
    opts : OptimizerSettings, optional
    seed : SeedSpec, optional
        Only used for ``opts.random_starts``.
    callback : callable, optional
        ``callback(start_index, iteration, theta, loglik)`` after every
        accepted step.

    Returns
    -------
    FitResult
        Best start by likelihood; ties go to the lexicographically smallest
        theta.  ``converged`` is False when no start improved on its initial
        point or the winner hit ``max_iter``.
    """
    opts = opts or OptimizerSettings()
    x = _as_series(x)
    n = x.size
    d = K.dim
    if n < 50 * d:
        raise ValueError(f"need at least 50*(p+q+1) = {50 * d} observations, got {n}")
    tol = opts.tol if opts.tol is not None else 1e-6 * n
    x2 = x * x
    obj = _Objective(x2, K.p, K.q)

    starts = K.start_points(opts.n_starts)
    if opts.random_starts:
        rng = (seed or SeedSpec(0)).generator()
        lo, hi = K.bounds()
        for _ in range(opts.random_starts):
            starts.append(K.project(lo + rng.random(d) * (hi - lo)))

    runs = []
    for i, s in enumerate(starts):
        cb = None if callback is None else (lambda it, th, ll, i=i: callback(i, it, th, ll))
        theta, ll, ll0, it, pg, status = _ascend(obj, K, s, tol, opts.max_iter, cb)
        runs.append(StartDiagnostics(tuple(s), tuple(theta), ll0, ll, it, pg, status))

    improved = [r for r in runs if r.loglik > r.loglik_start]
    pool = [r for r in runs if np.isfinite(r.loglik)] or runs
    best = min(pool, key=lambda r: (-r.loglik, r.theta))
    warning = _degenerate(x2, d)
    if not improved:
        converged = False
        msg = "no start improved on its initial point"
        warning = msg if warning is None else f"{warning}; {msg}"
    else:
        converged = best.status in ("converged", "stalled") and best.loglik > best.loglik_start
        if best.status == "converged":
            converged = True
    theta_hat = GarchParams.from_theta(np.array(best.theta), K.p, K.q)
    return FitResult(
        theta_hat=theta_hat,
        loglik=best.loglik,
        iterations=best.iterations,
        converged=converged,
        gradient_norm=best.gradient_norm,
        starts_used=len(runs),
        warning=warning,
        starts=tuple(runs),
    )
