"""
GARCH(p, q) parameters, path simulation and stationarity checks.

The simulated recursion is

    X_t = sigma_t Z_t,
    sigma_t^2 = alpha_0 + sum_i alpha_i X_{t-i}^2 + sum_j beta_j sigma_{t-j}^2,

started from the deterministic fixed point ``alpha_0 / (1 - sum(beta))`` with
zero presample observations.  The burn-in segment is kept on the path so that
stationary quantities (true volatility and its parameter gradient) can be
reconstructed later.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import ExplosiveParametersError, NonStationaryError
from .innovations import InnovationModel, SeedSpec

__all__ = [
    "GarchParams",
    "GarchPath",
    "necessary_stationarity",
    "simulate",
    "lyapunov_stationarity",
    "DEFAULT_BURN_IN",
]

DEFAULT_BURN_IN = 2000


@dataclass(frozen=True)
class GarchParams:
    """
    Parameter vector ``theta = (alpha_0, ..., alpha_p, beta_1, ..., beta_q)``.

    Parameters
    ----------
    alpha : sequence of float
        ``(alpha_0, alpha_1, ..., alpha_p)``; ``p = len(alpha) - 1 >= 1``.
    beta : sequence of float
        ``(beta_1, ..., beta_q)``; may be empty (ARCH).
    """

    alpha: tuple[float, ...]
    beta: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        alpha = tuple(float(a) for a in self.alpha)
        beta = tuple(float(b) for b in self.beta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        if len(alpha) < 2:
            raise ValueError("alpha must hold alpha_0 and at least alpha_1 (p >= 1)")
        if not all(np.isfinite(alpha + beta)):
            raise ValueError("GARCH parameters must be finite")
        if alpha[0] <= 0:
            raise ValueError(f"alpha_0 must be positive, got {alpha[0]}")
        if any(a < 0 for a in alpha[1:]) or any(b < 0 for b in beta):
            raise ValueError("alpha_i and beta_j must be non-negative")

    @property
    def p(self) -> int:
        return len(self.alpha) - 1

    @property
    def q(self) -> int:
        return len(self.beta)

    @property
    def dim(self) -> int:
        return self.p + self.q + 1

    @property
    def beta_sum(self) -> float:
        return float(sum(self.beta))

    @property
    def theta(self) -> np.ndarray:
        return np.array(self.alpha + self.beta, dtype=float)

    @property
    def alpha_array(self) -> np.ndarray:
        return np.array(self.alpha, dtype=float)

    @property
    def beta_array(self) -> np.ndarray:
        return np.array(self.beta, dtype=float)

    @classmethod
    def from_theta(cls, theta: Sequence[float], p: int, q: int) -> GarchParams:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (p + q + 1,):
            raise ValueError(f"theta must have length p+q+1={p + q + 1}")
        return cls(tuple(theta[: p + 1]), tuple(theta[p + 1 :]))

    def padded(self, p: int, q: int) -> GarchParams:
        """Same model written with zero coefficients up to orders ``(p, q)``."""
        if p < self.p or q < self.q:
            raise ValueError("cannot pad to smaller orders")
        alpha = self.alpha + (0.0,) * (p - self.p)
        beta = self.beta + (0.0,) * (q - self.q)
        return GarchParams(alpha, beta)

    def fixed_point(self) -> float:
        """``alpha_0 / (1 - sum(beta))``, the presample value of the filter."""
        b = self.beta_sum
        if b >= 1:
            raise ValueError(f"sum(beta) = {b} >= 1: fixed-point initialization undefined")
        return self.alpha[0] / (1.0 - b)

    def names(self) -> list[str]:
        return [f"alpha{i}" for i in range(self.p + 1)] + [f"beta{j}" for j in range(1, self.q + 1)]

    def to_dict(self) -> dict[str, list[float]]:
        return {"alpha": list(self.alpha), "beta": list(self.beta)}


@dataclass(frozen=True, eq=False)
class GarchPath:
    """
    A simulated trajectory of length ``n`` after burn-in.

    ``presample_x`` / ``presample_sigma2`` hold the discarded burn-in values,
    in time order, so the stationary filter can be rerun from the same start.
    """

    x: np.ndarray
    sigma2: np.ndarray
    z: np.ndarray
    params_used: GarchParams
    burn_in: int
    presample_x: np.ndarray = field(default_factory=lambda: np.empty(0))
    presample_sigma2: np.ndarray = field(default_factory=lambda: np.empty(0))
    presample_z: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def full(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Burn-in and retained segments concatenated: ``(x, sigma2, z)``."""
        return (
            np.concatenate([self.presample_x, self.x]),
            np.concatenate([self.presample_sigma2, self.sigma2]),
            np.concatenate([self.presample_z, self.z]),
        )


def necessary_stationarity(params: GarchParams) -> bool:
    """``sum(beta) < 1``; necessary (not sufficient) for a stationary solution."""
    return params.beta_sum < 1.0


def simulate(
    params: GarchParams,
    model: InnovationModel,
    n: int,
    burn_in: int = DEFAULT_BURN_IN,
    seed: SeedSpec | None = None,
    check_stationarity: bool = True,
    z: np.ndarray | None = None,
) -> GarchPath:
    """
    Simulate ``n`` observations of a GARCH(p, q) process.

    Parameters
    ----------
    params : GarchParams
    model : InnovationModel
        Innovation law; ignored when ``z`` is given.
    n : int
        Length of the returned path.
    burn_in : int
        Number of leading values discarded.
    seed : SeedSpec
        Random stream for the innovations.
    check_stationarity : bool
        Estimate the top Lyapunov exponent first and refuse when it is not
        negative.  Experiment drivers check once and then pass ``False``.
    z : ndarray, optional
        Explicit innovations of length ``burn_in + n``.

    Raises
    ------
    NonStationaryError
        The Lyapunov pre-check failed.
    ExplosiveParametersError
        ``sigma_t^2`` overflowed; the exception carries the first bad index.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    h0 = params.fixed_point()
    if z is None:
        if seed is None:
            raise ValueError("either seed or z must be given")
        z = model.sample(burn_in + n, seed.substream(0).generator())
    else:
        z = np.ascontiguousarray(z, dtype=float)
        if z.shape != (burn_in + n,):
            raise ValueError("z must have length burn_in + n")
    if check_stationarity:
        check_seed = seed.substream(1) if seed is not None else SeedSpec(0, 0, (1,))
        est = lyapunov_stationarity(params, model, horizon=1000, reps=10, seed=check_seed)
        if not est.rho_hat < 0:
            raise NonStationaryError(est.rho_hat, est.std_err)
    x, sigma2, bad = _kernels.simulate_path(params.alpha_array, params.beta_array, z, h0)
    if bad >= 0:
        raise ExplosiveParametersError(int(bad), burn_in)
    return GarchPath(
        x=x[burn_in:].copy(),
        sigma2=sigma2[burn_in:].copy(),
        z=z[burn_in:].copy(),
        params_used=params,
        burn_in=burn_in,
        presample_x=x[:burn_in].copy(),
        presample_sigma2=sigma2[:burn_in].copy(),
        presample_z=z[:burn_in].copy(),
    )


def lyapunov_stationarity(
    params: GarchParams,
    model: InnovationModel,
    horizon: int = 2000,
    reps: int = 20,
    seed: SeedSpec | None = None,
):
    """
    Estimate the top Lyapunov exponent of the volatility transition matrices.

    A negative value means the GARCH recursion has a unique stationary
    solution.  See :func:`stablegarch.sre.top_lyapunov` for the estimator.
    """
    from .sre import build_sre, top_lyapunov

    if horizon < 100:
        raise ValueError("horizon must be >= 100")
    seed = seed if seed is not None else SeedSpec(0)
    system = build_sre(params)
    return top_lyapunov(system.m1_sampler(), model, horizon, reps, seed)
