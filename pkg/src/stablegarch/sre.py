"""
Polynomial linear stochastic recurrence embedding of GARCH(p, q).

The state vector (orders padded with zero coefficients to ``p, q >= 3``) is

    Y_t = ( sigma^2_{t+1}, ..., sigma^2_{t-q+2},           q entries
            X^2_t, ..., X^2_{t-p+2},                       p-1 entries
            dh_{t+1}/d alpha_i, ..., dh_{t-q+2}/d alpha_i,  q entries, i = 0..p
            dh_{t+1}/d beta_k,  ..., dh_{t-q+2}/d beta_k )  q entries, k = 1..q

and evolves as ``Y_t = P(Z_t) Y_{t-1} + Q`` with

    P(z) = [[M1(z), 0,  0 ],
            [M2(z), M3, 0 ],
            [M4,    0,  M5]],

``M3 = diag(C, ..., C)`` (p+1 copies) and ``M5 = diag(C, ..., C)`` (q copies),
``C`` the companion matrix of ``(beta_1, ..., beta_q)``.  ``P`` is affine in
``z**2``: ``P(z) = P0 + z**2 P1``.

Also here: spectral radius, top Lyapunov exponent of i.i.d. random matrix
products and the moment-decay search for the exponent ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .garch import GarchParams
from .innovations import InnovationModel, SeedSpec

__all__ = [
    "SreSystem",
    "LyapunovEstimate",
    "MomentDecayResult",
    "build_sre",
    "iterate_sre",
    "embed_states",
    "spectral_radius",
    "companion",
    "top_lyapunov",
    "moment_decay_check",
    "AffineSquareSampler",
    "ConstantSampler",
    "BlockTriangularSampler",
    "MIN_ORDER",
    "RENORMALIZE_EVERY",
]

MIN_ORDER = 3
RENORMALIZE_EVERY = 10

MatrixSampler = Callable[[np.ndarray], np.ndarray]


def companion(beta: Sequence[float]) -> np.ndarray:
    """``q x q`` matrix with first row ``beta`` and ones on the subdiagonal."""
    q = len(beta)
    c = np.zeros((q, q))
    c[0, :] = beta
    c[np.arange(1, q), np.arange(q - 1)] = 1.0
    return c


@dataclass(frozen=True)
class LyapunovEstimate:
    rho_hat: float
    std_err: float
    horizon: int
    reps: int
    s_tilde: float | None = None

    def to_dict(self) -> dict:
        return {
            "rho_hat": self.rho_hat,
            "std_err": self.std_err,
            "horizon": self.horizon,
            "reps": self.reps,
            "s_tilde": self.s_tilde,
        }


@dataclass(frozen=True)
class MomentDecayResult:
    """Outcome of the search for ``E||P_t...P_1||**s <= c * lam**t``."""

    passed: bool
    s_tilde: float | None = None
    lam: float | None = None
    c: float | None = None
    r2: float | None = None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "s_tilde": self.s_tilde, "lambda": self.lam,
                "c": self.c, "r2": self.r2}


class AffineSquareSampler:
    """``z -> P0 + z**2 P1`` evaluated on a batch of innovations."""

    def __init__(self, p0: np.ndarray, p1: np.ndarray) -> None:
        self.p0 = np.asarray(p0, dtype=float)
        self.p1 = np.asarray(p1, dtype=float)

    @property
    def dim(self) -> int:
        return self.p0.shape[0]

    def __call__(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.p0 + (z * z)[:, None, None] * self.p1


class ConstantSampler:
    def __init__(self, a: np.ndarray) -> None:
        self.a = np.asarray(a, dtype=float)

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.a, (np.shape(z)[0],) + self.a.shape).copy()


class BlockTriangularSampler:
    """``[[A(z), 0], [B(z), C(z)]]`` from three batched samplers."""

    def __init__(self, a: MatrixSampler, b: MatrixSampler, c: MatrixSampler) -> None:
        self.a, self.b, self.c = a, b, c

    def __call__(self, z: np.ndarray) -> np.ndarray:
        a, b, c = self.a(z), self.b(z), self.c(z)
        k, r = a.shape[0], a.shape[1]
        m = c.shape[1]
        out = np.zeros((k, r + m, r + m))
        out[:, :r, :r] = a
        out[:, r:, :r] = b
        out[:, r:, r:] = c
        return out


@dataclass(frozen=True, eq=False)
class SreSystem:
    """Matrices of the SRE embedding for a fixed true parameter."""

    theta0: GarchParams
    padded: GarchParams
    p0: np.ndarray
    p1: np.ndarray
    q_vec: np.ndarray

    @property
    def p(self) -> int:
        return self.padded.p

    @property
    def q(self) -> int:
        return self.padded.q

    @property
    def dim(self) -> int:
        return self.p0.shape[0]

    @property
    def n_state(self) -> int:
        """Size of the volatility block ``M1``."""
        return self.p + self.q - 1

    def P(self, z: float) -> np.ndarray:
        return self.p0 + z * z * self.p1

    @property
    def Q(self) -> np.ndarray:
        return self.q_vec

    def M1(self, z: float) -> np.ndarray:
        s = self.n_state
        return self.P(z)[:s, :s]

    def M2(self, z: float) -> np.ndarray:
        s, q, p = self.n_state, self.q, self.p
        return self.P(z)[s : s + (p + 1) * q, :s]

    @property
    def M3(self) -> np.ndarray:
        s, q, p = self.n_state, self.q, self.p
        return self.p0[s : s + (p + 1) * q, s : s + (p + 1) * q]

    @property
    def M4(self) -> np.ndarray:
        s, q, p = self.n_state, self.q, self.p
        return self.p0[s + (p + 1) * q :, :s]

    @property
    def M5(self) -> np.ndarray:
        s, q, p = self.n_state, self.q, self.p
        o = s + (p + 1) * q
        return self.p0[o:, o:]

    @property
    def C(self) -> np.ndarray:
        return companion(self.padded.beta)

    def sampler(self) -> AffineSquareSampler:
        return AffineSquareSampler(self.p0, self.p1)

    def m1_sampler(self) -> AffineSquareSampler:
        s = self.n_state
        return AffineSquareSampler(self.p0[:s, :s], self.p1[:s, :s])

    def grad_offset(self, component: int) -> int:
        """Start of the gradient block for padded component ``component``."""
        return self.n_state + component * self.q

    def component_index(self, original_component: int) -> int:
        """Map a component of ``theta0`` to its index in the padded parameter."""
        p0 = self.theta0.p
        if original_component <= p0:
            return original_component
        return self.p + (original_component - p0)


def build_sre(theta0: GarchParams) -> SreSystem:
    """Assemble ``P(z) = P0 + z**2 P1`` and ``Q`` for the SRE embedding of ``theta0``."""
    p = max(theta0.p, MIN_ORDER)
    q = max(theta0.q, MIN_ORDER)
    padded = theta0.padded(p, q)
    a = padded.alpha
    b = padded.beta
    s = p + q - 1
    dim = s + q * (p + q + 1)
    p0 = np.zeros((dim, dim))
    p1 = np.zeros((dim, dim))

    # M1: first row (tau_t, beta_q, alpha_2..alpha_{p-1}, alpha_p)
    p0[0, :q] = b
    p1[0, 0] = a[1]
    p0[0, q : q + p - 1] = a[2 : p + 1]
    for r in range(1, q):  # shift of sigma^2
        p0[r, r - 1] = 1.0
    p1[q, 0] = 1.0  # X_t^2 = Z_t^2 sigma_t^2
    for r in range(q + 1, q + p - 1):  # shift of X^2
        p0[r, r - 1] = 1.0

    c = companion(b)
    # M2 / M3: gradient blocks for alpha_0..alpha_p
    for i in range(p + 1):
        o = s + i * q
        p0[o : o + q, o : o + q] = c
        if i == 1:
            p1[o, 0] = 1.0  # d/d alpha_1 picks up X_t^2 = Z_t^2 sigma_t^2
        elif i >= 2:
            p0[o, q + i - 2] = 1.0  # X^2_{t+1-i}
    # M4 / M5: gradient blocks for beta_1..beta_q
    for k in range(1, q + 1):
        o = s + (p + 1) * q + (k - 1) * q
        p0[o : o + q, o : o + q] = c
        p0[o, k - 1] = 1.0  # sigma^2_{t+1-k}

    q_vec = np.zeros(dim)
    q_vec[0] = a[0]
    q_vec[p + q - 1] = 1.0
    return SreSystem(theta0=theta0, padded=padded, p0=p0, p1=p1, q_vec=q_vec)


def iterate_sre(system: SreSystem, z, y0, q_scale: float = 1.0) -> np.ndarray:
    """
    States ``Y_1, ..., Y_T`` of ``Y_t = P(z_t) Y_{t-1} + q_scale * Q``.

    Raises
    ------
    FloatingPointError
        A state became non-finite; the message names the first bad step.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y0, dtype=float).copy()
    if y.shape != (system.dim,) or not np.all(np.isfinite(y)):
        raise ValueError("y0 must be a finite vector of length dim")
    qv = q_scale * system.q_vec
    out = np.empty((z.shape[0], system.dim))
    with np.errstate(over="ignore", invalid="ignore"):
        for t, zt in enumerate(z):
            y = system.p0 @ y + (zt * zt) * (system.p1 @ y) + qv
            if not np.all(np.isfinite(y)):
                raise FloatingPointError(f"SRE state overflow at step {t + 1}")
            out[t] = y
    return out


def embed_states(system: SreSystem, x, sigma2, grad) -> tuple[np.ndarray, np.ndarray]:
    """
    Stack the SRE state from directly computed series.

    Parameters
    ----------
    x, sigma2 : ndarray
        Observations and squared volatilities on a common 0-based time axis.
    grad : ndarray
        ``d sigma2_t / d theta`` for the *padded* parameter, shape ``(n, dim_theta)``.

    Returns
    -------
    t_index : ndarray
        Times ``t`` for which the state ``Y_t`` is fully observed.
    states : ndarray
        ``Y_t`` for those times, one row each.
    """
    p, q = system.p, system.q
    x2 = np.asarray(x, dtype=float) ** 2
    sigma2 = np.asarray(sigma2, dtype=float)
    grad = np.asarray(grad, dtype=float)
    n = x2.shape[0]
    if grad.shape != (n, p + q + 1):
        raise ValueError("grad must be the gradient for the padded parameter")
    start = max(q - 2, p - 2)
    t_index = np.arange(start, n - 1)
    states = np.empty((t_index.size, system.dim))
    for row, t in enumerate(t_index):
        lag_h = t + 1 - np.arange(q)  # t+1, ..., t-q+2
        lag_x = t - np.arange(p - 1)  # t, ..., t-p+2
        parts = [sigma2[lag_h], x2[lag_x]]
        for c in range(p + q + 1):
            parts.append(grad[lag_h, c])
        states[row] = np.concatenate(parts)
    return t_index, states


def spectral_radius(matrix, tol: float = 1e-8, max_iter: int = 10_000) -> float:
    """
    Largest eigenvalue modulus.

    Nilpotent matrices give exactly 0.  Otherwise power iteration is tried
    first; when it does not settle on a real dominant eigenpair (complex or
    tied dominant eigenvalues, defective matrices) within ``max_iter`` steps
    the Hessenberg-QR eigenvalues from LAPACK are used, and only their
    failure is an error.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    n = a.shape[0]
    scale = np.linalg.norm(a, ord=np.inf)
    if scale == 0.0:
        return 0.0
    # Structurally nilpotent matrices (e.g. P(0) with beta = 0) reach the
    # zero matrix exactly; eigenvalue routines would only get within
    # eps**(1/k) of zero for a size-k Jordan block.
    power = a.copy()
    steps = 1
    while steps < n and np.any(power):
        power = power @ power
        steps *= 2
    if not np.any(power):
        return 0.0
    v = np.ones(n) / np.sqrt(n) + np.linspace(0.0, 1e-3, n)
    v /= np.linalg.norm(v)
    prev = np.inf
    for _ in range(max_iter):
        w = a @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        rayleigh = float(v @ w)
        resid = np.linalg.norm(w - rayleigh * v)
        if resid < tol * scale * 1e-2 and abs(abs(rayleigh) - prev) < tol:
            lam = abs(rayleigh)
            # accept only if no eigenvalue is larger (guards against a
            # start vector orthogonal to the dominant eigenspace)
            ev = np.linalg.eigvals(a)
            if lam >= np.max(np.abs(ev)) - tol:
                return lam
            break
        prev = abs(rayleigh)
        v = w / nw
    try:
        ev = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigenvalue computation did not converge: {exc}") from None
    return float(np.max(np.abs(ev)))


def _log_norm_paths(sampler: MatrixSampler, z: np.ndarray, record_at=None):
    """
    ``log ||P_t ... P_1||`` per replicate, columns of ``z`` being replicates.

    The running product is divided by its operator 2-norm (from an SVD)
    every ``RENORMALIZE_EVERY`` steps and the logs are accumulated.
    """
    horizon, reps = z.shape
    first = np.asarray(sampler(z[0]), dtype=float)
    d = first.shape[1]
    prod = np.broadcast_to(np.eye(d), (reps, d, d)).copy()
    logacc = np.zeros(reps)
    record_at = set() if record_at is None else set(int(t) for t in record_at)
    recorded = {}
    with np.errstate(divide="ignore"):
        for t in range(horizon):
            m = first if t == 0 else np.asarray(sampler(z[t]), dtype=float)
            if not np.all(np.isfinite(m)):
                raise ValueError("matrix sampler produced non-finite entries")
            prod = m @ prod
            step = t + 1
            if step % RENORMALIZE_EVERY == 0 or step == horizon or step in record_at:
                nrm = np.linalg.norm(prod, ord=2, axis=(1, 2))
                logacc = logacc + np.log(nrm)
                safe = np.where(nrm > 0, nrm, 1.0)
                prod = prod / safe[:, None, None]
                if step in record_at:
                    recorded[step] = logacc.copy()
    return logacc, recorded


def top_lyapunov(
    sampler: MatrixSampler,
    model: InnovationModel,
    horizon: int,
    reps: int,
    seed: SeedSpec,
) -> LyapunovEstimate:
    """
    Estimate ``rho = lim t^{-1} E log ||P_t ... P_1||`` for ``P_t = sampler(Z_t)``.

    Parameters
    ----------
    sampler : callable
        Maps a batch of innovations, shape ``(k,)``, to matrices ``(k, d, d)``.
    model : InnovationModel
        Law of the i.i.d. innovations.
    horizon, reps : int
        Product length and number of independent products.
    seed : SeedSpec

    Returns
    -------
    LyapunovEstimate
        Mean of ``t^{-1} log ||product||`` across replicates and its standard error.
    """
    if horizon < 100:
        raise ValueError("horizon must be >= 100")
    if reps < 10:
        raise ValueError("reps must be >= 10")
    z = model.sample(horizon * reps, seed.generator()).reshape(horizon, reps)
    logacc, _ = _log_norm_paths(sampler, z)
    per_rep = logacc / horizon
    rho = float(np.mean(per_rep))
    se = float(np.std(per_rep, ddof=1) / np.sqrt(reps)) if np.all(np.isfinite(per_rep)) else float("nan")
    return LyapunovEstimate(rho_hat=rho, std_err=se, horizon=horizon, reps=reps)


def moment_decay_check(
    sampler: MatrixSampler,
    model: InnovationModel,
    s_grid: Sequence[float] = (1.0, 0.5, 0.25, 0.1),
    t_grid: Sequence[int] = tuple(range(5, 55, 5)),
    reps: int = 2000,
    seed: SeedSpec | None = None,
    min_r2: float = 0.95,
) -> MomentDecayResult:
    """
    Search ``s`` such that ``E||P_t...P_1||**s`` decays like ``c * lam**t``, ``lam < 1``.

    For each ``s`` (in the given order) the Monte-Carlo moments over
    ``t_grid`` are fitted by least squares on the log scale; the first ``s``
    with ``lam < 1`` and ``R**2 >= min_r2`` is returned.  When none passes
    the result has ``passed=False``.
    """
    if len(s_grid) == 0 or len(t_grid) < 2:
        raise ValueError("s_grid must be nonempty and t_grid must have at least two horizons")
    seed = seed if seed is not None else SeedSpec(0)
    t_grid = np.array(sorted(set(int(t) for t in t_grid)))
    horizon = int(t_grid[-1])
    z = model.sample(horizon * reps, seed.generator()).reshape(horizon, reps)
    _, recorded = _log_norm_paths(sampler, z, record_at=t_grid)
    logs = np.array([recorded[int(t)] for t in t_grid])  # (len(t_grid), reps)
    for s in s_grid:
        with np.errstate(invalid="ignore"):
            log_m = logsumexp(s * logs, axis=1) - np.log(reps)
        if not np.all(np.isfinite(log_m)):
            continue
        slope, intercept = np.polyfit(t_grid, log_m, 1)
        fitted = intercept + slope * t_grid
        ss_tot = np.sum((log_m - log_m.mean()) ** 2)
        if ss_tot == 0.0:
            continue
        r2 = 1.0 - np.sum((log_m - fitted) ** 2) / ss_tot
        lam = float(np.exp(slope))
        if lam < 1.0 and r2 >= min_r2:
            return MomentDecayResult(True, float(s), lam, float(np.exp(intercept)), float(r2))
    return MomentDecayResult(False)
