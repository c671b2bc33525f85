"""
Monte-Carlo experiment drivers.

Every replicate draws from its own stream ``SeedSpec(base_seed, replicate,
(n,))``, so results do not depend on the order in which replicates run or on
the number of worker processes.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from scipy import stats

from .config import ExperimentConfig
from .errors import ExplosiveParametersError, NonStationaryError
from .filtering import run_filter, stationary_filter
from .garch import GarchParams, lyapunov_stationarity, simulate
from .innovations import InnovationModel, SeedSpec, normalizing_a_n
from .qmle import CompactSetK, OptimizerSettings, fit
from .sre import build_sre, embed_states, iterate_sre, moment_decay_check, spectral_radius, top_lyapunov
from .tails import TailReport, extremal_index_blocks, hill

__all__ = [
    "RateRow",
    "RateResult",
    "rate_normalizer",
    "check_stationary",
    "run_rate_experiment",
    "summarize_rate",
    "write_rate_csv",
    "read_rate_csv",
    "run_stable_limit",
    "stable_limit_from_rows",
    "run_mt_sums",
    "run_sandwich",
    "lyapunov_report",
    "sre_check_report",
    "sre_equivalence_error",
    "LimitSample",
    "SandwichEstimate",
    "fmt_float",
]

# sub-stream keys below the replicate level
_SIM, _FIT = 0, 1
# stream indices reserved for whole-experiment checks (replicates use 0..reps-1)
_CHECK_STREAM = 2**62


def fmt_float(v: float) -> str:
    """17 significant digits: reading the text back gives the same double."""
    return format(float(v), ".17g")


def rate_normalizer(model: InnovationModel, n: int) -> float:
    """``x_n = n / a_n`` when ``Z**2`` has infinite variance, else ``sqrt(n)``."""
    if model.square_tail_index() < 2.0:
        return n / normalizing_a_n(model, n)
    return math.sqrt(n)


def check_stationary(theta0: GarchParams, model: InnovationModel, base_seed: int,
                     horizon: int = 2000, reps: int = 20):
    """Lyapunov pre-check shared by all drivers; raises when the estimate is not negative."""
    est = lyapunov_stationarity(theta0, model, horizon, reps, SeedSpec(base_seed, _CHECK_STREAM))
    if not est.rho_hat < 0:
        raise NonStationaryError(est.rho_hat, est.std_err)
    return est


def _map(func: Callable, tasks: Sequence, threads: int) -> list:
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    return [func(t) for t in tasks]


# --------------------------------------------------------------------------
# rate experiment


@dataclass(frozen=True)
class RateRow:
    n: int
    replicate: int
    converged: bool
    theta_hat: tuple[float, ...]
    error: tuple[float, ...]
    x_n: float
    runtime_ms: float | None = None

    @property
    def sup_error(self) -> float:
        return max(abs(e) for e in self.error)


@dataclass(frozen=True)
class RateResult:
    rows: tuple[RateRow, ...]
    summary: dict[str, Any]
    names: tuple[str, ...]


@dataclass(frozen=True)
class _FitTask:
    theta0: GarchParams
    model: InnovationModel
    n: int
    burn_in: int
    K: CompactSetK
    opts: OptimizerSettings
    seed: SeedSpec
    x_n: float
    timing: bool


def _fit_replicate(task: _FitTask) -> RateRow:
    t0 = time.perf_counter()
    d = task.theta0.dim
    try:
        path = simulate(task.theta0, task.model, task.n, task.burn_in, task.seed.substream(_SIM),
                        check_stationarity=False)
        res = fit(path.x, task.K, task.opts, task.seed.substream(_FIT))
        theta = tuple(float(v) for v in res.theta_hat.theta)
        err = tuple(float(v) for v in res.theta_hat.theta - task.theta0.theta)
        ok = bool(res.converged)
    except (ExplosiveParametersError, FloatingPointError, np.linalg.LinAlgError):
        theta = err = (math.nan,) * d
        ok = False
    runtime = (time.perf_counter() - t0) * 1e3 if task.timing else None
    return RateRow(task.n, task.seed.stream_index, ok, theta, err, task.x_n, runtime)


def _ols_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float | None]:
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    dof = x.size - 2
    if dof <= 0:
        return float(coef[1]), None
    resid = y - X @ coef
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    return float(coef[1]), float(math.sqrt(cov[1, 1]))


def summarize_rate(rows: Sequence[RateRow]) -> dict[str, Any]:
    """
    Per-n medians of ``|theta_hat - theta0|_inf`` over converged fits and the
    least-squares slope of log median error on log n.

    Works identically on rows read back from the CSV file.
    """
    by_n: dict[int, list[RateRow]] = {}
    for r in rows:
        by_n.setdefault(r.n, []).append(r)
    per_n = []
    for n in sorted(by_n):
        ok = [r.sup_error for r in by_n[n] if r.converged]
        per_n.append({
            "n": n,
            "replications": len(by_n[n]),
            "failed": len(by_n[n]) - len(ok),
            "median_sup_error": float(np.median(ok)) if ok else None,
            "x_n": by_n[n][0].x_n,
        })
    usable = [e for e in per_n if e["median_sup_error"] is not None and e["median_sup_error"] > 0]
    summary: dict[str, Any] = {"per_n": per_n, "rows": len(rows)}
    if len(usable) >= 2:
        lx = np.log([e["n"] for e in usable])
        ly = np.log([e["median_sup_error"] for e in usable])
        slope, se = _ols_slope(lx, ly)
        summary.update(slope=slope, slope_std_err=se, slope_available=True)
    else:
        summary.update(slope=None, slope_std_err=None, slope_available=False)
    return summary


def run_rate_experiment(cfg: ExperimentConfig, n_grid: Sequence[int] | None = None,
                        replications: int | None = None) -> RateResult:
    """Simulate and fit ``replications`` paths for every ``n`` in the grid."""
    if cfg.theta0 is None or cfg.K is None:
        raise ValueError("rate experiment needs theta0 and K")
    n_grid = tuple(n_grid or cfg.n_grid)
    reps = replications or cfg.replications
    check_stationary(cfg.theta0, cfg.innovation, cfg.base_seed)
    tasks = []
    for n in n_grid:
        x_n = rate_normalizer(cfg.innovation, n)
        for r in range(reps):
            tasks.append(_FitTask(cfg.theta0, cfg.innovation, n, cfg.burn_in, cfg.K, cfg.optimizer,
                                  SeedSpec(cfg.base_seed, r, (n,)), x_n, cfg.record_timing))
    rows = tuple(_map(_fit_replicate, tasks, cfg.threads))
    return RateResult(rows=rows, summary=summarize_rate(rows), names=tuple(cfg.theta0.names()))


def write_rate_csv(result: RateResult, path) -> None:
    names = result.names
    header = (["n", "replicate", "converged"] + [f"theta_hat_{c}" for c in names]
              + [f"error_{c}" for c in names] + ["x_n", "runtime_ms"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in result.rows:
            w.writerow([r.n, r.replicate, int(r.converged)]
                       + [fmt_float(v) for v in r.theta_hat] + [fmt_float(v) for v in r.error]
                       + [fmt_float(r.x_n), "" if r.runtime_ms is None else fmt_float(r.runtime_ms)])


def read_rate_csv(path) -> tuple[list[RateRow], tuple[str, ...]]:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        names = tuple(h[len("theta_hat_"):] for h in header if h.startswith("theta_hat_"))
        d = len(names)
        rows = []
        for rec in rd:
            rows.append(RateRow(
                n=int(rec[0]), replicate=int(rec[1]), converged=rec[2] == "1",
                theta_hat=tuple(float(v) for v in rec[3 : 3 + d]),
                error=tuple(float(v) for v in rec[3 + d : 3 + 2 * d]),
                x_n=float(rec[3 + 2 * d]),
                runtime_ms=float(rec[4 + 2 * d]) if rec[4 + 2 * d] else None,
            ))
    return rows, names


# --------------------------------------------------------------------------
# stable limit of the estimator


def _hill_or_none(values: np.ndarray, tail: str) -> TailReport | None:
    x = np.abs(values) if tail == "both" else np.clip(values, 0.0, None)
    try:
        return hill(x)
    except ValueError:
        return None


@dataclass(frozen=True)
class LimitSample:
    """Replicate sample of a normalized statistic with per-component diagnostics."""

    n: int
    normalizer: float
    values: np.ndarray  # (replicates, d)
    names: tuple[str, ...]
    hill: tuple[TailReport | None, ...]
    pair_sum_hill: tuple[TailReport | None, ...]
    kurtosis: tuple[float, ...]
    failed: int
    tail: str = "both"
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "normalizer": self.normalizer,
            "replicates_used": int(self.values.shape[0]),
            "failed": self.failed,
            "hill_tail": self.tail,
            "components": {
                name: {
                    "hill": None if h is None else h.to_dict(),
                    "pair_sum_hill": None if hp is None else hp.to_dict(),
                    "kurtosis": k,
                }
                for name, h, hp, k in zip(self.names, self.hill, self.pair_sum_hill, self.kurtosis)
            },
            **self.extra,
        }


def _limit_sample(values: np.ndarray, n: int, normalizer: float, names, failed: int,
                  tail: str = "both", extra=None) -> LimitSample:
    """
    Per-component Hill, pair-sum Hill and kurtosis.

    ``tail="both"`` estimates the index of ``|value|``; ``"upper"`` uses the
    right tail only, for statistics whose limit is totally skewed to the right.
    """
    d = values.shape[1]
    hills, pair_hills, kurt = [], [], []
    m = values.shape[0] // 2
    for j in range(d):
        col = values[:, j]
        hills.append(_hill_or_none(col, tail))
        # sums of disjoint pairs: a stable law keeps its index under convolution
        pair = col[: 2 * m : 2] + col[1 : 2 * m : 2]
        pair_hills.append(_hill_or_none(pair, tail) if m >= 20 else None)
        kurt.append(float(stats.kurtosis(col, fisher=False)) if col.size >= 4 else math.nan)
    return LimitSample(n, normalizer, values, tuple(names), tuple(hills), tuple(pair_hills),
                       tuple(kurt), failed, tail, extra or {})


def run_stable_limit(cfg: ExperimentConfig, n: int | None = None,
                     replications: int | None = None) -> tuple[LimitSample, RateResult]:
    """
    Replicates of ``x_n (theta_hat - theta0)`` at the largest ``n``.

    With heavy-tailed noise ``x_n = n / a_n`` and the Hill index per component
    estimates the stability index; with light tails ``x_n = sqrt(n)`` and the
    kurtosis serves as a normality control.
    """
    n = n or cfg.n_max
    res = run_rate_experiment(cfg, (n,), replications)
    return stable_limit_from_rows(res.rows, res.names), res


def stable_limit_from_rows(rows: Sequence[RateRow], names: Sequence[str]) -> LimitSample:
    """Standardized errors ``x_n (theta_hat - theta0)`` of the converged rows at one ``n``."""
    ns = {r.n for r in rows}
    if len(ns) != 1:
        raise ValueError("rows must share a single sample size")
    n = ns.pop()
    ok = [r for r in rows if r.converged]
    x_n = rows[0].x_n
    values = np.array([r.error for r in ok], dtype=float).reshape(len(ok), len(names)) * x_n
    return _limit_sample(values, n, x_n, names, len(rows) - len(ok))


# --------------------------------------------------------------------------
# martingale transform


@dataclass(frozen=True)
class _MtTask:
    theta0: GarchParams
    model: InnovationModel
    n: int
    burn_in: int
    seed: SeedSpec
    scale: float
    gamma: bool


def _mt_replicate(task: _MtTask):
    path = simulate(task.theta0, task.model, task.n, task.burn_in, task.seed.substream(_SIM),
                    check_stationarity=False)
    h, grad = stationary_filter(path, task.theta0)
    G = grad / h[:, None]
    Y = 0.5 * (path.z**2 - 1.0)
    GY = G * Y[:, None]
    s = GY.sum(axis=0) / task.scale
    bound = 1.0 / max(task.theta0.alpha)
    margin = float(np.min(np.abs(G).sum(axis=1)) - bound)
    gamma = None
    if task.gamma:
        gamma = extremal_index_blocks(np.linalg.norm(GY, axis=1), 100, 0.99)
    return s, margin, gamma


def run_mt_sums(cfg: ExperimentConfig, n: int | None = None,
                replications: int | None = None) -> LimitSample:
    """
    Replicates of ``a_n^{-1} sum_t G_t Y_t`` with ``G_t = h'_t / sigma_t^2`` and
    ``Y_t = (Z_t^2 - 1)/2`` at the true parameter (``sqrt(n)`` for light tails).

    Every component of ``G_t`` is nonnegative and ``Y_t >= -1/2``, so the
    limit is totally skewed to the right and the Hill index is taken from the
    upper tail.  ``extra`` records the smallest ``|G_t|_1 - 1/max_i alpha_i`` over all paths
    and the blocks extremal index of ``|G_t Y_t|`` on the first path.
    """
    if cfg.theta0 is None:
        raise ValueError("mt-sums needs theta0")
    n = n or cfg.n_max
    reps = replications or cfg.replications
    check_stationary(cfg.theta0, cfg.innovation, cfg.base_seed)
    if cfg.innovation.square_tail_index() < 2.0:
        scale = normalizing_a_n(cfg.innovation, n)
    else:
        scale = math.sqrt(n)
    tasks = [_MtTask(cfg.theta0, cfg.innovation, n, cfg.burn_in, SeedSpec(cfg.base_seed, r, (n,)),
                     scale, r == 0 and n >= 5000) for r in range(reps)]
    out = _map(_mt_replicate, tasks, cfg.threads)
    values = np.array([o[0] for o in out])
    margins = [o[1] for o in out]
    extra = {
        "min_G_lower_bound_margin": float(min(margins)),
        "G_lower_bound_holds": bool(min(margins) >= -1e-9),
        "extremal_index_GY": out[0][2],
    }
    names = cfg.theta0.names()
    return _limit_sample(values, n, scale, names, 0, tail="upper", extra=extra)


# --------------------------------------------------------------------------
# sandwich matrices


@dataclass(frozen=True)
class SandwichEstimate:
    A0: np.ndarray
    B0: np.ndarray
    sandwich: np.ndarray
    fourth_moment: float
    second_moment: np.ndarray

    def to_dict(self) -> dict[str, Any]:
        return {
            "A0": self.A0.tolist(),
            "B0": self.B0.tolist(),
            "sandwich": self.sandwich.tolist(),
            "neg_B0_inv": (-np.linalg.inv(self.B0)).tolist(),
            "fourth_moment_hat": self.fourth_moment,
            "B0_eigenvalues": np.linalg.eigvalsh(self.B0).tolist(),
        }


def run_sandwich(cfg: ExperimentConfig, stream: int = 0, n: int | None = None) -> SandwichEstimate:
    """
    Ergodic averages over one long stationary path:
    ``A0 = (E Z^4 - 1)/4 * E[h' h'^T / sigma^4]`` and ``B0 = -1/2 * E[h' h'^T / sigma^4]``.
    """
    if cfg.theta0 is None:
        raise ValueError("sandwich needs theta0")
    if not math.isfinite(cfg.innovation.fourth_moment()):
        raise ValueError(
            f"{cfg.innovation.family} innovations have E Z^4 = infinity; "
            "the normal sandwich B0^-1 A0 B0^-1 does not exist"
        )
    n = n or cfg.sandwich_n
    check_stationary(cfg.theta0, cfg.innovation, cfg.base_seed)
    path = simulate(cfg.theta0, cfg.innovation, n, cfg.burn_in,
                    SeedSpec(cfg.base_seed, _CHECK_STREAM + 1 + stream), check_stationarity=False)
    h, grad = stationary_filter(path, cfg.theta0)
    G = grad / h[:, None]
    M = G.T @ G / n
    kappa = float(np.mean(path.z**4))
    A0 = 0.25 * (kappa - 1.0) * M
    B0 = -0.5 * M
    Binv = np.linalg.inv(B0)
    return SandwichEstimate(A0, B0, Binv @ A0 @ Binv, kappa, M)


# --------------------------------------------------------------------------
# Lyapunov and SRE reports


def lyapunov_report(cfg: ExperimentConfig) -> dict[str, Any]:
    """Top Lyapunov estimates for the volatility block and for the full SRE map."""
    th = cfg.theta0
    if th is None:
        raise ValueError("lyapunov needs theta0")
    system = build_sre(th)
    seed = SeedSpec(cfg.base_seed, _CHECK_STREAM)
    m1 = lyapunov_stationarity(th, cfg.innovation, cfg.lyapunov_horizon, cfg.lyapunov_reps, seed)
    full = top_lyapunov(system.sampler(), cfg.innovation, cfg.lyapunov_horizon, cfg.lyapunov_reps,
                        seed.substream(1))
    return {
        "theta0": th.to_dict(),
        "innovation": cfg.innovation.to_dict(),
        "necessary_stationarity": th.beta_sum < 1.0,
        "volatility_block": m1.to_dict(),
        "full_sre": full.to_dict(),
        "stationary": bool(m1.rho_hat < 0),
    }


def sre_equivalence_error(theta0: GarchParams, model: InnovationModel, seed: SeedSpec,
                          steps: int = 500) -> float:
    """Largest relative gap between iterated SRE states and the direct recursions."""
    system = build_sre(theta0)
    path = simulate(theta0, model, steps + 10, burn_in=200, seed=seed, check_stationarity=False)
    x, s2, z = path.full()
    out = run_filter(x, system.padded)
    t_idx, states = embed_states(system, x, s2, out.grad)
    t0 = t_idx[0]
    ys = iterate_sre(system, z[t0 + 1 : t0 + 1 + steps], states[0])
    ref = states[1 : 1 + steps]
    scale = np.maximum(np.abs(ref), np.finfo(float).tiny)
    rel = np.where(ref != 0, np.abs(ys - ref) / scale, np.abs(ys))
    return float(np.max(rel))


def sre_check_report(cfg: ExperimentConfig) -> dict[str, Any]:
    th = cfg.theta0
    if th is None:
        raise ValueError("sre-check needs theta0")
    system = build_sre(th)
    seed = SeedSpec(cfg.base_seed, _CHECK_STREAM)
    est = top_lyapunov(system.sampler(), cfg.innovation, cfg.lyapunov_horizon, cfg.lyapunov_reps,
                       seed.substream(1))
    decay = moment_decay_check(system.sampler(), cfg.innovation, reps=500, seed=seed.substream(2))
    est = replace(est, s_tilde=decay.s_tilde)
    return {
        "theta0": th.to_dict(),
        "padded_orders": [system.p, system.q],
        "dim": system.dim,
        "spectral_radius_P0": spectral_radius(system.P(0.0)),
        "spectral_radius_M1_0": spectral_radius(system.M1(0.0)),
        "lyapunov": est.to_dict(),
        "moment_decay": decay.to_dict(),
        "equivalence_max_rel_error": sre_equivalence_error(th, cfg.innovation, seed.substream(3)),
    }

