"""
Tail diagnostics for regularly varying data.

Hill estimation of the tail index, an empirical check of Breiman's product
tail relation, the empirical spectral measure of large vectors and the
blocks estimator of the extremal index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "TailReport",
    "BreimanResult",
    "hill",
    "hill_sweep",
    "default_k",
    "breiman_ratio",
    "empirical_spectral_measure",
    "extremal_index_blocks",
]


@dataclass(frozen=True)
class TailReport:
    alpha_hat: float
    k_used: int
    ci_low: float
    ci_high: float
    n: int

    def to_dict(self) -> dict:
        return {"alpha_hat": self.alpha_hat, "k_used": self.k_used, "ci_low": self.ci_low,
                "ci_high": self.ci_high, "n": self.n}


def default_k(n: int) -> int:
    """``floor(n**0.6)`` capped at ``n/10``, and at least 1."""
    return max(1, min(int(math.floor(n**0.6)), n // 10))


def _descending_positive(sample) -> np.ndarray:
    x = np.asarray(sample, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    x = x[x > 0]
    return -np.sort(-x)


def _hill_from_sorted(xs: np.ndarray, k: int, n: int) -> TailReport:
    if k < 1:
        raise ValueError("k must be >= 1")
    if k + 1 > xs.size:
        raise ValueError(f"need at least k+1 = {k + 1} positive values, got {xs.size}")
    denom = float(np.sum(np.log(xs[:k] / xs[k])))
    if denom <= 0.0:
        raise ValueError("tied order statistics: Hill denominator is zero")
    a = k / denom
    half = 1.96 / math.sqrt(k)
    return TailReport(alpha_hat=a, k_used=k, ci_low=a * (1 - half), ci_high=a * (1 + half), n=n)


def hill(sample, k: int | None = None) -> TailReport:
    """
    Hill estimate ``k / sum_{i<=k} log(X_(i) / X_(k+1))``.

    Parameters
    ----------
    sample : array_like
        Observations; only the positive ones enter the order statistics, so
        passing ``np.clip(x, 0, None)`` estimates the upper tail of ``x``.
    k : int, optional
        Number of upper order statistics; defaults to :func:`default_k` of
        the full sample size.
    """
    xs = _descending_positive(sample)
    n = int(np.size(sample))
    if k is None:
        # k counts upper order statistics of the whole sample
        k = min(default_k(n), xs.size - 1)
    return _hill_from_sorted(xs, int(k), n)


def hill_sweep(sample, ks: Sequence[int] | None = None) -> list[TailReport]:
    """Hill estimates over a range of ``k`` (default: a log-spaced grid)."""
    xs = _descending_positive(sample)
    n = int(np.size(sample))
    if ks is None:
        top = max(2, xs.size // 4)
        ks = np.unique(np.geomspace(5, top, 40).astype(int))
    out = []
    for k in ks:
        if 1 <= k < xs.size:
            try:
                out.append(_hill_from_sorted(xs, int(k), n))
            except ValueError:
                continue
    return out


@dataclass(frozen=True)
class BreimanResult:
    thresholds: np.ndarray
    ratios: np.ndarray
    valid: np.ndarray
    eta_moment: float

    def to_dict(self) -> dict:
        return {"thresholds": self.thresholds.tolist(), "ratios": self.ratios.tolist(),
                "valid": self.valid.tolist(), "eta_moment": self.eta_moment}


def breiman_ratio(xi, eta, alpha: float, x_grid) -> BreimanResult:
    """
    Empirical ``P(xi * eta > x) / P(xi > x)`` on a grid of thresholds.

    Breiman's lemma predicts the ratio tends to ``E eta**alpha``, reported as
    ``eta_moment``.  Thresholds that no ``xi`` exceeds get ``nan`` and
    ``valid=False``.
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if xi.shape != eta.shape or xi.ndim != 1:
        raise ValueError("xi and eta must be 1-d arrays of equal length")
    if np.any(xi <= 0) or np.any(eta <= 0):
        raise ValueError("xi and eta must be positive")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    x_grid = np.atleast_1d(np.asarray(x_grid, dtype=float))
    prod = np.sort(xi * eta)
    xs = np.sort(xi)
    n_prod = prod.size - np.searchsorted(prod, x_grid, side="right")
    n_xi = xs.size - np.searchsorted(xs, x_grid, side="right")
    valid = n_xi > 0
    ratios = np.full(x_grid.shape, np.nan)
    ratios[valid] = n_prod[valid] / n_xi[valid]
    return BreimanResult(x_grid, ratios, valid, float(np.mean(eta**alpha)))


def empirical_spectral_measure(
    vectors,
    radius_quantile: float,
    partition: Sequence[Callable[[np.ndarray], np.ndarray]],
) -> np.ndarray:
    """
    Share of large vectors whose direction falls in each partition set.

    Parameters
    ----------
    vectors : array_like, shape (n, d)
    radius_quantile : float
        Vectors with Euclidean norm above this empirical quantile count as large.
    partition : sequence of callables
        Each maps unit vectors ``(m, d)`` to a boolean mask; a direction is
        assigned to the first set that claims it.  Every large direction must
        be claimed.

    Returns
    -------
    ndarray
        Weights per set, summing to one.
    """
    v = np.asarray(vectors, dtype=float)
    if v.ndim != 2:
        raise ValueError("vectors must be a 2-d array (n, d)")
    if not 0.9 <= radius_quantile < 1:
        raise ValueError("radius_quantile must lie in [0.9, 1)")
    if len(partition) == 0:
        raise ValueError("partition must contain at least one set")
    norms = np.linalg.norm(v, axis=1)
    r = np.quantile(norms, radius_quantile)
    big = norms > r
    if not np.any(big):
        raise ValueError("no vector exceeds the radius threshold")
    u = v[big] / norms[big, None]
    label = np.full(u.shape[0], -1)
    for j, member in enumerate(partition):
        mask = np.asarray(member(u), dtype=bool) & (label < 0)
        label[mask] = j
    if np.any(label < 0):
        raise ValueError("partition does not cover every exceedance direction")
    counts = np.bincount(label, minlength=len(partition))
    return counts / counts.sum()


def extremal_index_blocks(
    series, block_len: int, threshold_quantile: float = 0.99, method: str = "log"
) -> float:
    """
    Blocks estimator of the extremal index.

    Parameters
    ----------
    series : array_like
        Stationary sequence; only complete blocks are used.
    block_len : int
        Block length ``r >= 2``.
    threshold_quantile : float
        The threshold is this empirical quantile of the series.
    method : {"log", "ratio"}
        ``"ratio"`` is ``K / N``, blocks with an exceedance over exceedances.
        For independent data it concentrates near ``(1 - (1-q)**r) / (r (1-q))``
        rather than 1, so the default ``"log"`` uses
        ``log(1 - K/b) / (r log(1 - N/m))`` with ``b`` blocks covering ``m``
        values, which removes that bias.

    Returns
    -------
    float
        Estimate in ``(0, 1]``.
    """
    x = np.asarray(series, dtype=float).ravel()
    if block_len < 2:
        raise ValueError("block_len must be >= 2")
    if x.size < 50 * block_len:
        raise ValueError(f"series needs at least 50*block_len = {50 * block_len} values")
    if not 0 < threshold_quantile < 1:
        raise ValueError("threshold_quantile must lie in (0, 1)")
    if method not in ("log", "ratio"):
        raise ValueError("method must be 'log' or 'ratio'")
    u = np.quantile(x, threshold_quantile)
    nb = x.size // block_len
    m = nb * block_len
    exc = (x[:m] > u).reshape(nb, block_len)
    total = int(exc.sum())
    if total == 0:
        raise ValueError("no exceedances of the threshold")
    hit = int(np.any(exc, axis=1).sum())
    if method == "ratio":
        return hit / total
    if hit == nb or total == m:
        # every block hit: the log form degenerates, fall back to the ratio
        return hit / total
    g = math.log1p(-hit / nb) / (block_len * math.log1p(-total / m))
    return min(1.0, g)
