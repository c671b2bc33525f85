"""
Command-line entry point.

    stablegarch <subcommand> --config FILE [--seed N] [--out DIR] [--threads N]

Exit status: 0 on success, 1 for usage or configuration errors, 2 when the
run itself fails (non-stationary parameters, overflow, ...).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .config import KINDS, THREADS_ENV, ExperimentConfig, load_config
from .errors import ConfigError
from .experiments import (
    check_stationary,
    fmt_float,
    lyapunov_report,
    rate_normalizer,
    run_mt_sums,
    run_rate_experiment,
    run_sandwich,
    run_stable_limit,
    sre_check_report,
    write_rate_csv,
)
from .garch import simulate
from .innovations import SeedSpec
from .qmle import fit
from .tails import hill, hill_sweep

__all__ = ["main", "cli_main", "build_parser"]


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems exit with 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stablegarch", description="GARCH QMLE experiments")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", required=True, help="key = value configuration file")
        p.add_argument("--seed", type=int, default=None, help="override base_seed")
        p.add_argument("--out", default=None, help="output directory (overrides 'output')")
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker processes (overrides {THREADS_ENV} and 'threads')")
    return parser


def _clean(obj: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    kw: dict[str, Any] = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer", field="--seed")
        kw["base_seed"] = args.seed
    if args.out is not None:
        kw["output"] = Path(args.out)
    threads = args.threads
    if threads is None and os.environ.get(THREADS_ENV):
        try:
            threads = int(os.environ[THREADS_ENV])
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer", field=THREADS_ENV) from None
    if threads is not None:
        if threads < 1:
            raise ConfigError("thread count must be >= 1", field="--threads")
        kw["threads"] = threads
    return cfg.with_overrides(**kw) if kw else cfg


def _cmd_simulate(cfg: ExperimentConfig, out: Path) -> str:
    check_stationary(cfg.theta0, cfg.innovation, cfg.base_seed)
    path = simulate(cfg.theta0, cfg.innovation, cfg.n_max, cfg.burn_in, SeedSpec(cfg.base_seed, 0),
                    check_stationarity=False)
    with open(out / "path.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "sigma2", "z"])
        for t in range(path.n):
            w.writerow([t + 1, fmt_float(path.x[t]), fmt_float(path.sigma2[t]), fmt_float(path.z[t])])
    return f"simulate: n={path.n} mean(x^2)={np.mean(path.x**2):.6g} -> {out / 'path.csv'}"


def _cmd_fit(cfg: ExperimentConfig, out: Path) -> str:
    if cfg.data_input is not None:
        try:
            x = np.loadtxt(cfg.data_input, dtype=float, ndmin=1)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read data.input: {exc}", field="data.input") from None
        if x.ndim != 1:
            raise ConfigError("data.input must hold a single column", field="data.input")
        source = str(cfg.data_input)
    else:
        check_stationary(cfg.theta0, cfg.innovation, cfg.base_seed)
        x = simulate(cfg.theta0, cfg.innovation, cfg.n_max, cfg.burn_in, SeedSpec(cfg.base_seed, 0),
                     check_stationarity=False).x
        source = "simulated"
    res = fit(x, cfg.K, cfg.optimizer, SeedSpec(cfg.base_seed, 0, (1,)))
    report = {"source": source, "n": int(x.size), "K": cfg.K.to_dict(), **res.to_dict()}
    if cfg.theta0 is not None:
        report["theta0"] = cfg.theta0.to_dict()
        report["sup_error"] = float(np.max(np.abs(res.theta_hat.theta - cfg.theta0.theta)))
    _write_json(out / "fit.json", report)
    th = ", ".join(f"{v:.5g}" for v in res.theta_hat.theta)
    return f"fit: theta_hat=({th}) loglik={res.loglik:.6g} converged={res.converged}"


def _cmd_rate(cfg: ExperimentConfig, out: Path) -> str:
    res = run_rate_experiment(cfg)
    write_rate_csv(res, out / "rate.csv")
    _write_json(out / "rate_summary.json", {
        "theta0": cfg.theta0.to_dict(),
        "innovation": cfg.innovation.to_dict(),
        **res.summary,
    })
    s = res.summary
    slope = "n/a (needs two sample sizes)" if not s["slope_available"] else f"{s['slope']:.4f}"
    return f"rate: {s['rows']} rows, slope={slope}"


def _write_limit_csv(path: Path, names, replicate_ids, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replicate"] + list(names))
        for r, row in zip(replicate_ids, values):
            w.writerow([r] + [fmt_float(v) for v in row])


def _cmd_stable_limit(cfg: ExperimentConfig, out: Path) -> str:
    sample, res = run_stable_limit(cfg)
    ids = [r.replicate for r in res.rows if r.converged]
    _write_limit_csv(out / "stable_limit.csv", sample.names, ids, sample.values)
    _write_json(out / "stable_limit.json", {"innovation": cfg.innovation.to_dict(), **sample.to_dict()})
    h = sample.hill[1] if len(sample.hill) > 1 else None
    tail = "n/a" if h is None else f"{h.alpha_hat:.3f}"
    return f"stable-limit: {sample.values.shape[0]} replicates, Hill(alpha1)={tail}, kurtosis(alpha1)={sample.kurtosis[1]:.3f}"


def _cmd_mt_sums(cfg: ExperimentConfig, out: Path) -> str:
    sample = run_mt_sums(cfg)
    _write_limit_csv(out / "mt_sums.csv", sample.names, range(sample.values.shape[0]), sample.values)
    _write_json(out / "mt_sums.json", {"innovation": cfg.innovation.to_dict(), **sample.to_dict()})
    h = sample.hill[0]
    tail = "n/a" if h is None else f"{h.alpha_hat:.3f}"
    return f"mt-sums: {sample.values.shape[0]} replicates, Hill(first)={tail}"


def _cmd_lyapunov(cfg: ExperimentConfig, out: Path) -> str:
    rep = lyapunov_report(cfg)
    _write_json(out / "lyapunov.json", rep)
    v = rep["volatility_block"]
    return f"lyapunov: rho_hat={v['rho_hat']:.6g} (s.e. {v['std_err']:.3g})"


def _cmd_sre_check(cfg: ExperimentConfig, out: Path) -> str:
    rep = sre_check_report(cfg)
    _write_json(out / "sre_check.json", rep)
    return (f"sre-check: dim={rep['dim']} rho_hat={rep['lyapunov']['rho_hat']:.6g} "
            f"equivalence error={rep['equivalence_max_rel_error']:.3g}")


def _cmd_tails(cfg: ExperimentConfig, out: Path) -> str:
    try:
        x = np.loadtxt(cfg.tails_input, dtype=float, ndmin=1)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read tails.input: {exc}", field="tails.input") from None
    if x.ndim != 1:
        raise ConfigError("tails.input must hold a single column", field="tails.input")
    x = np.abs(x)
    rep = hill(x, cfg.tails_k)
    _write_json(out / "tails.json", rep.to_dict())
    with open(out / "tails_sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "alpha_hat", "ci_low", "ci_high"])
        for r in hill_sweep(x):
            w.writerow([r.k_used, fmt_float(r.alpha_hat), fmt_float(r.ci_low), fmt_float(r.ci_high)])
    return f"tails: alpha_hat={rep.alpha_hat:.4f} (k={rep.k_used})"


def _cmd_sandwich(cfg: ExperimentConfig, out: Path) -> str:
    first = run_sandwich(cfg, stream=0)
    second = run_sandwich(cfg, stream=1)
    target = -np.linalg.inv(second.B0)
    rel = np.abs(first.sandwich - target) / np.abs(target)
    _write_json(out / "sandwich.json", {
        "theta0": cfg.theta0.to_dict(),
        "innovation": cfg.innovation.to_dict(),
        "n": cfg.sandwich_n,
        "run1": first.to_dict(),
        "run2": second.to_dict(),
        "max_rel_diff_sandwich1_vs_neg_B0inv2": float(rel.max()),
    })
    return f"sandwich: max relative gap between runs {rel.max():.3g}"


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "rate": _cmd_rate,
    "stable-limit": _cmd_stable_limit,
    "mt-sums": _cmd_mt_sums,
    "lyapunov": _cmd_lyapunov,
    "sre-check": _cmd_sre_check,
    "tails": _cmd_tails,
    "sandwich": _cmd_sandwich,
}


def cli_main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _apply_overrides(load_config(args.config, args.command), args)
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        where = f" [{exc.field}]" if exc.field else ""
        print(f"stablegarch {args.command}: invalid configuration{where}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"stablegarch {args.command}: cannot create output directory: {exc}", file=sys.stderr)
        return 1
    try:
        line = _COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        where = f" [{exc.field}]" if exc.field else ""
        print(f"stablegarch {args.command}: invalid configuration{where}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - every runtime failure maps to exit status 2
        print(f"stablegarch {args.command}: failed: {exc}", file=sys.stderr)
        return 2
    print(line)
    return 0


def main() -> None:
    sys.exit(cli_main())
