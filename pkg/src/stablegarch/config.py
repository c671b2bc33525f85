"""
Experiment configuration: a flat ``key = value`` text format.

Keys are dotted (``theta0.alpha``, ``innovation.family``, ``K.m``, ...).
Values are Python literals (numbers, lists, quoted strings, ``true``/``false``);
a bare word is read as a string.  ``#`` starts a comment.  The full key list
is in ``KNOWN_KEYS``; unknown keys are rejected so typos do not pass silently.
"""

from __future__ import annotations

import ast
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .garch import DEFAULT_BURN_IN, GarchParams
from .innovations import Gaussian, InnovationModel, innovation_from_dict
from .qmle import CompactSetK, OptimizerSettings

__all__ = [
    "ExperimentConfig",
    "KINDS",
    "KNOWN_KEYS",
    "parse_config_text",
    "load_config",
    "config_from_mapping",
    "THREADS_ENV",
]

KINDS = ("simulate", "fit", "rate", "stable-limit", "mt-sums", "lyapunov", "sre-check", "tails", "sandwich")
ESTIMATION_KINDS = ("fit", "rate", "stable-limit")
THREADS_ENV = "STABLEGARCH_THREADS"

KNOWN_KEYS = {
    "kind": "subcommand this file is meant for (optional; must match the CLI subcommand)",
    "theta0.alpha": "list (alpha_0, ..., alpha_p)",
    "theta0.beta": "list (beta_1, ..., beta_q), may be empty",
    "innovation.family": "gaussian | student_t | pareto_hybrid",
    "innovation.nu": "degrees of freedom for student_t (> 2)",
    "innovation.alpha_tail": "tail index of Z^2 for pareto_hybrid (> 1)",
    "n_grid": "strictly increasing list of sample sizes",
    "replications": "replicates per sample size",
    "burn_in": f"discarded simulation prefix (default {DEFAULT_BURN_IN})",
    "K.m": "lower bound of every coordinate (default 0.01)",
    "K.M": "upper bound of every coordinate (default 5)",
    "K.beta_bar": "bound on sum(beta) (default 0.95)",
    "optimizer.tol": "projected-gradient tolerance (default 1e-6 * n)",
    "optimizer.max_iter": "iterations per start (default 500)",
    "optimizer.n_starts": "grid starts, >= 5 (default 5)",
    "optimizer.random_starts": "extra random starts (default 0)",
    "base_seed": "unsigned 64-bit seed for all randomness",
    "output": "output directory",
    "threads": "worker processes (default 1)",
    "record_timing": "write per-replicate runtime_ms (breaks byte-identical reruns; default false)",
    "lyapunov.horizon": "product length for Lyapunov estimates (default 2000)",
    "lyapunov.reps": "independent products (default 20)",
    "tails.input": "single-column numeric text file",
    "tails.k": "Hill k (default floor(n^0.6) capped at n/10)",
    "sandwich.n": "length of the stationary path (default 200000)",
    "data.input": "single-column observation file for fit",
    "model.p": "ARCH order for fit without theta0 (default 1)",
    "model.q": "GARCH order for fit without theta0 (default 1)",
}

_WORDS = {"true": True, "false": False, "none": None, "null": None}


def _parse_value(raw: str) -> Any:
    text = raw.strip()
    if text.lower() in _WORDS:
        return _WORDS[text.lower()]
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _strip_comment(line: str) -> str:
    quote = None
    for i, ch in enumerate(line):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "#":
            return line[:i]
    return line


def parse_config_text(text: str) -> dict[str, Any]:
    """Read ``key = value`` lines into a flat dict of parsed values."""
    out: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = _strip_comment(line).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}", field=key)
        out[key] = _parse_value(value)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    theta0: GarchParams | None = None
    innovation: InnovationModel = field(default_factory=Gaussian)
    n_grid: tuple[int, ...] = (2000, 8000, 32000)
    replications: int = 200
    burn_in: int = DEFAULT_BURN_IN
    K: CompactSetK | None = None
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    base_seed: int = 0
    output: Path = Path("out")
    threads: int = 1
    record_timing: bool = False
    lyapunov_horizon: int = 2000
    lyapunov_reps: int = 20
    tails_input: Path | None = None
    tails_k: int | None = None
    sandwich_n: int = 200_000
    data_input: Path | None = None
    orders: tuple[int, int] = (1, 1)

    @property
    def n_max(self) -> int:
        return self.n_grid[-1]

    def with_overrides(self, **kw) -> ExperimentConfig:
        return replace(self, **kw)


def _num(raw: dict, key: str, kind=float, default=None, positive=True):
    if key not in raw:
        return default
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}", field=key)
    if kind is int:
        if float(v) != int(v):
            raise ConfigError(f"{key} must be an integer, got {v!r}", field=key)
        v = int(v)
    else:
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError(f"{key} must be finite", field=key)
    if positive and v <= 0:
        raise ConfigError(f"{key} must be positive, got {v!r}", field=key)
    return v


def _float_list(raw: dict, key: str) -> tuple[float, ...]:
    v = raw[key]
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, (list, tuple)) or not all(
        isinstance(a, (int, float)) and not isinstance(a, bool) for a in v
    ):
        raise ConfigError(f"{key} must be a list of numbers, got {v!r}", field=key)
    return tuple(float(a) for a in v)


def config_from_mapping(raw: dict[str, Any], kind: str) -> ExperimentConfig:
    """Validate a parsed mapping for the subcommand ``kind``."""
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}", field="kind")
    unknown = sorted(k for k in raw if k not in KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r}", field=unknown[0])
    if "kind" in raw and raw["kind"] != kind:
        raise ConfigError(f"config is for {raw['kind']!r}, not {kind!r}", field="kind")

    theta0 = None
    needs_theta = kind not in ("tails",) and not (kind == "fit" and "data.input" in raw)
    if "theta0.alpha" in raw or "theta0.beta" in raw:
        if "theta0.alpha" not in raw:
            raise ConfigError("theta0.alpha is required", field="theta0.alpha")
        alpha = _float_list(raw, "theta0.alpha")
        beta = _float_list(raw, "theta0.beta") if "theta0.beta" in raw else ()
        try:
            theta0 = GarchParams(alpha, beta)
        except ValueError as exc:
            raise ConfigError(f"theta0: {exc}", field="theta0.alpha") from None
    elif needs_theta:
        raise ConfigError("missing required field theta0.alpha", field="theta0.alpha")

    inn = {k.split(".", 1)[1]: v for k, v in raw.items() if k.startswith("innovation.")}
    try:
        innovation = innovation_from_dict(inn) if inn else Gaussian()
    except ValueError as exc:
        raise ConfigError(f"innovation: {exc}", field="innovation.family") from None

    n_grid = raw.get("n_grid", (2000, 8000, 32000))
    if isinstance(n_grid, int) and not isinstance(n_grid, bool):
        n_grid = (n_grid,)
    if not isinstance(n_grid, (list, tuple)) or not n_grid or not all(
        isinstance(v, int) and not isinstance(v, bool) and v > 0 for v in n_grid
    ):
        raise ConfigError("n_grid must be a nonempty list of positive integers", field="n_grid")
    n_grid = tuple(int(v) for v in n_grid)
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ConfigError("n_grid must be strictly increasing", field="n_grid")

    orders = (_num(raw, "model.p", int, 1), _num(raw, "model.q", int, 1, positive=False))
    if orders[1] < 0:
        raise ConfigError("model.q must be >= 0", field="model.q")
    if theta0 is not None:
        orders = (theta0.p, theta0.q)

    K = None
    if kind in ESTIMATION_KINDS:
        try:
            K = CompactSetK(
                p=orders[0],
                q=orders[1],
                m=_num(raw, "K.m", float, 0.01),
                M=_num(raw, "K.M", float, 5.0),
                beta_bar=_num(raw, "K.beta_bar", float, 0.95),
            )
        except ValueError as exc:
            raise ConfigError(f"K: {exc}", field="K.m") from None
        if theta0 is not None and not K.interior(theta0.theta):
            raise ConfigError("theta0 must lie in the interior of K", field="theta0.alpha")

    try:
        optimizer = OptimizerSettings(
            tol=_num(raw, "optimizer.tol", float, None),
            max_iter=_num(raw, "optimizer.max_iter", int, 500),
            n_starts=_num(raw, "optimizer.n_starts", int, 5),
            random_starts=_num(raw, "optimizer.random_starts", int, 0, positive=False),
        )
    except ValueError as exc:
        raise ConfigError(f"optimizer: {exc}", field="optimizer") from None

    base_seed = _num(raw, "base_seed", int, 0, positive=False)
    if not 0 <= base_seed < 2**64:
        raise ConfigError("base_seed must be an unsigned 64-bit integer", field="base_seed")
    record_timing = raw.get("record_timing", False)
    if not isinstance(record_timing, bool):
        raise ConfigError("record_timing must be true or false", field="record_timing")

    def _path(key):
        if key not in raw:
            return None
        return Path(str(raw[key]))

    cfg = ExperimentConfig(
        kind=kind,
        theta0=theta0,
        innovation=innovation,
        n_grid=n_grid,
        replications=_num(raw, "replications", int, 200),
        burn_in=_num(raw, "burn_in", int, DEFAULT_BURN_IN, positive=False),
        K=K,
        optimizer=optimizer,
        base_seed=base_seed,
        output=_path("output") or Path("out"),
        threads=_num(raw, "threads", int, 1),
        record_timing=record_timing,
        lyapunov_horizon=_num(raw, "lyapunov.horizon", int, 2000),
        lyapunov_reps=_num(raw, "lyapunov.reps", int, 20),
        tails_input=_path("tails.input"),
        tails_k=_num(raw, "tails.k", int, None),
        sandwich_n=_num(raw, "sandwich.n", int, 200_000),
        data_input=_path("data.input"),
        orders=orders,
    )
    if cfg.burn_in < 0:
        raise ConfigError("burn_in must be >= 0", field="burn_in")
    if cfg.lyapunov_horizon < 100:
        raise ConfigError("lyapunov.horizon must be >= 100", field="lyapunov.horizon")
    if cfg.lyapunov_reps < 10:
        raise ConfigError("lyapunov.reps must be >= 10", field="lyapunov.reps")
    if kind == "tails" and cfg.tails_input is None:
        raise ConfigError("missing required field tails.input", field="tails.input")
    if kind == "sandwich" and cfg.sandwich_n < 1000:
        raise ConfigError("sandwich.n must be >= 1000", field="sandwich.n")
    return cfg


def load_config(path, kind: str) -> ExperimentConfig:
    """Read and validate a config file; relative input paths resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", field="--config") from None
    raw = parse_config_text(text)
    for key in ("tails.input", "data.input"):
        if key in raw and not os.path.isabs(str(raw[key])):
            raw[key] = str(path.parent / str(raw[key]))
    return config_from_mapping(raw, kind)
