"""
Standardized innovation laws for GARCH simulation.

Every family is scaled so that ``E Z = 0`` and ``E Z**2 = 1`` and has a density
that is positive around the origin.  The tail index reported for each family
refers to ``Z**2``, which is the quantity that drives the stable limit theory
of the quasi-likelihood score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import special, stats

__all__ = [
    "SeedSpec",
    "InnovationModel",
    "Gaussian",
    "StudentT",
    "ParetoHybrid",
    "innovation_from_dict",
    "sample_innovations",
    "square_tail_index",
    "normalizing_a_n",
]

_MAX_SEED = 2**64


@dataclass(frozen=True)
class SeedSpec:
    """
    Address of an independent random stream.

    Streams are keyed by ``(base_seed, stream_index, *path)`` through
    :class:`numpy.random.SeedSequence` and drive a counter-based Philox
    generator, so replicate ``i`` always sees the same numbers no matter
    which worker runs it or in what order.
    """

    base_seed: int
    stream_index: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= int(self.base_seed) < _MAX_SEED:
            raise ValueError("base_seed must be an unsigned 64-bit integer")
        if int(self.stream_index) < 0:
            raise ValueError("stream_index must be non-negative")
        if any(int(k) < 0 for k in self.path):
            raise ValueError("sub-stream keys must be non-negative")

    def substream(self, *keys: int) -> SeedSpec:
        """Derive a child stream; distinct key tuples give independent streams."""
        return SeedSpec(self.base_seed, self.stream_index, self.path + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=int(self.base_seed),
            spawn_key=(int(self.stream_index), *self.path),
        )
        return np.random.Generator(np.random.Philox(seq))


class InnovationModel:
    """Base class for the standardized noise laws."""

    family: str = "abstract"

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def square_tail_index(self) -> float:
        """Regular-variation index of ``Z**2`` (``inf`` when all moments exist)."""
        raise NotImplementedError

    def square_sf(self, y: float) -> float:
        """``P(Z**2 > y)``."""
        raise NotImplementedError

    def fourth_moment(self) -> float:
        """``E Z**4``; ``inf`` when it does not exist."""
        raise NotImplementedError

    @property
    def heavy_tailed(self) -> bool:
        """True when ``Z**2`` has infinite variance (index below 2)."""
        return self.square_tail_index() < 2.0

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Gaussian(InnovationModel):
    family: str = field(default="gaussian", init=False)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(n)

    def square_tail_index(self) -> float:
        return math.inf

    def square_sf(self, y: float) -> float:
        if y <= 0:
            return 1.0
        return float(special.erfc(math.sqrt(y / 2.0)))

    def fourth_moment(self) -> float:
        return 3.0

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family}


@dataclass(frozen=True)
class StudentT(InnovationModel):
    """Student t with ``nu`` degrees of freedom rescaled by ``sqrt((nu-2)/nu)``."""

    nu: float = 5.0
    family: str = field(default="student_t", init=False)

    def __post_init__(self) -> None:
        if not (np.isfinite(self.nu) and self.nu > 2):
            raise ValueError(f"StudentT requires nu > 2 for unit variance, got nu={self.nu}")

    @property
    def scale(self) -> float:
        return math.sqrt((self.nu - 2.0) / self.nu)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_t(self.nu, n) * self.scale

    def square_tail_index(self) -> float:
        return self.nu / 2.0

    def square_sf(self, y: float) -> float:
        if y <= 0:
            return 1.0
        # |T| > sqrt(y) / scale, two-sided
        return float(2.0 * stats.t.sf(math.sqrt(y) / self.scale, self.nu))

    def fourth_moment(self) -> float:
        if self.nu <= 4:
            return math.inf
        return 3.0 * (self.nu - 2.0) / (self.nu - 4.0)

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "nu": self.nu}


@dataclass(frozen=True)
class ParetoHybrid(InnovationModel):
    """
    Symmetric law: uniform on ``[-x0, x0]``, density proportional to
    ``|x|**(-2*alpha_tail - 1)`` beyond, glued continuously.

    The tail of ``Z**2`` is then exactly ``K * y**(-alpha_tail)`` for
    ``y >= x0**2``, which makes the normalizing sequence available in closed
    form.  ``x0`` is solved from the unit-variance condition.
    """

    alpha_tail: float = 1.5
    family: str = field(default="pareto_hybrid", init=False)

    def __post_init__(self) -> None:
        if not (np.isfinite(self.alpha_tail) and self.alpha_tail > 1):
            raise ValueError(
                f"ParetoHybrid requires alpha_tail > 1 for finite variance, got {self.alpha_tail}"
            )

    @property
    def x0(self) -> float:
        a = self.alpha_tail
        # Var = x0**2 * (1/3 + 1/(2a-2)) / (1 + 1/(2a))
        return math.sqrt((1.0 + 1.0 / (2.0 * a)) / (1.0 / 3.0 + 1.0 / (2.0 * a - 2.0)))

    @property
    def density_level(self) -> float:
        """Constant density value on ``[-x0, x0]``."""
        return 1.0 / (2.0 * self.x0 * (1.0 + 1.0 / (2.0 * self.alpha_tail)))

    @property
    def uniform_weight(self) -> float:
        return 2.0 * self.density_level * self.x0

    @property
    def tail_constant(self) -> float:
        """``K`` in ``P(Z**2 > y) = K y**(-alpha_tail)`` for ``y >= x0**2``."""
        a = self.alpha_tail
        return self.density_level * self.x0 ** (2.0 * a + 1.0) / a

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.random(n)
        v = rng.random(n)
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        x0 = self.x0
        # 1 - v lies in (0, 1], keeping the Pareto draw finite
        tail = x0 * (1.0 - v) ** (-1.0 / (2.0 * self.alpha_tail))
        body = x0 * v
        return sign * np.where(u < self.uniform_weight, body, tail)

    def square_tail_index(self) -> float:
        return self.alpha_tail

    def square_sf(self, y: float) -> float:
        if y <= 0:
            return 1.0
        x0 = self.x0
        if y >= x0 * x0:
            return self.tail_constant * y ** (-self.alpha_tail)
        c = self.density_level
        return 2.0 * c * (x0 - math.sqrt(y)) + c * x0 / self.alpha_tail

    def fourth_moment(self) -> float:
        a = self.alpha_tail
        if a <= 2:
            return math.inf
        c, x0 = self.density_level, self.x0
        return 2.0 * c * (x0**5 / 5.0 + x0**5 / (2.0 * a - 4.0))

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "alpha_tail": self.alpha_tail}


_FAMILIES = {
    "gaussian": Gaussian,
    "normal": Gaussian,
    "student_t": StudentT,
    "studentt": StudentT,
    "t": StudentT,
    "pareto_hybrid": ParetoHybrid,
    "paretohybrid": ParetoHybrid,
}


def innovation_from_dict(spec: dict[str, Any]) -> InnovationModel:
    """Build a model from ``{"family": ..., <params>}``."""
    spec = dict(spec)
    try:
        family = str(spec.pop("family")).lower()
    except KeyError:
        raise ValueError("innovation.family is required") from None
    if family not in _FAMILIES:
        raise ValueError(f"unknown innovation family {family!r}")
    cls = _FAMILIES[family]
    try:
        return cls(**{k: float(v) for k, v in spec.items()})
    except TypeError as exc:
        raise ValueError(f"bad parameters for innovation family {family!r}: {exc}") from None


def sample_innovations(model: InnovationModel, n: int, seed: SeedSpec) -> np.ndarray:
    """Draw ``n`` i.i.d. standardized innovations; deterministic in ``seed``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return model.sample(int(n), seed.generator())


def square_tail_index(model: InnovationModel) -> float:
    return model.square_tail_index()


def _bisect_tail(sf, target: float, lo: float = 1.0, hi: float = 1e15, max_iter: int = 200,
                 rtol: float = 1e-10) -> float:
    # The bracket is widened downward for small n, where the root sits below 1.
    while sf(lo) < target:
        lo *= 0.5
        if lo < 1e-300:
            raise RuntimeError("could not bracket the tail quantile")
    if sf(hi) > target:
        raise RuntimeError("tail quantile exceeds 1e15")
    # bisection on log scale: the tail is monotone and spans many decades
    llo, lhi = math.log(lo), math.log(hi)
    for _ in range(max_iter):
        mid = 0.5 * (llo + lhi)
        if sf(math.exp(mid)) > target:
            llo = mid
        else:
            lhi = mid
        if lhi - llo < rtol * 1e-2:
            break
    return math.exp(0.5 * (llo + lhi))


def normalizing_a_n(model: InnovationModel, n: int) -> float:
    """
    Threshold ``a_n`` with ``P(Z**2 > a_n) = 1/n``.

    Parameters
    ----------
    model : InnovationModel
        A heavy-tailed family; Gaussian innovations have no such
        normalization (use ``sqrt(n)`` scaling instead).
    n : int
        Sample size, at least 2.
    """
    if n < 2:
        raise ValueError("normalizing_a_n requires n >= 2")
    if not np.isfinite(model.square_tail_index()):
        raise ValueError(
            f"{model.family} innovations have no heavy-tail normalization; use sqrt(n) scaling"
        )
    target = 1.0 / n
    if isinstance(model, ParetoHybrid):
        a = model.alpha_tail
        y = (model.tail_constant * n) ** (1.0 / a)
        if y >= model.x0**2:
            return y
        root = (1.0 - target) / (2.0 * model.density_level)
        return root * root
    return _bisect_tail(model.square_sf, target)
