import json
from pathlib import Path

import numpy as np
import pytest

from stablegarch.cli import cli_main
from stablegarch.config import KNOWN_KEYS, config_from_mapping, load_config, parse_config_text
from stablegarch.errors import ConfigError
from stablegarch.experiments import read_rate_csv, summarize_rate
from stablegarch.innovations import StudentT

BASE = """
theta0.alpha = [0.1, 0.1]
theta0.beta = [0.8]
innovation.family = {family}
{extra}
n_grid = {n_grid}
replications = {reps}
base_seed = 7
burn_in = 200
lyapunov.horizon = 200
lyapunov.reps = 10
sandwich.n = 5000
"""


def write_cfg(tmp_path, name="cfg.txt", family="gaussian", extra="", n_grid="[300, 600]", reps=3,
              more=""):
    p = tmp_path / name
    p.write_text(BASE.format(family=family, extra=extra, n_grid=n_grid, reps=reps) + more)
    return p


def run(args):
    return cli_main([str(a) for a in args])


def read_tree(d: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


# -- parsing ---------------------------------------------------------------


def test_parse_literals_and_comments():
    raw = parse_config_text("""
    # a comment
    a = [1, 2.5]   # trailing
    b = true
    c = "x # not a comment"
    d = student_t
    e = none
    """)
    assert raw == {"a": [1, 2.5], "b": True, "c": "x # not a comment", "d": "student_t", "e": None}


@pytest.mark.parametrize("text", ["novalue", "= 3", "a = 1\na = 2"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as ei:
        config_from_mapping({"theta0.alpha": [0.1, 0.1], "theta0.beta": [0.8], "n_gird": [1]}, "simulate")
    assert ei.value.field == "n_gird"


def test_mapping_defaults_and_validation():
    cfg = config_from_mapping({"theta0.alpha": [0.1, 0.1], "theta0.beta": [0.8],
                               "innovation.family": "student_t", "innovation.nu": 3}, "rate")
    assert isinstance(cfg.innovation, StudentT) and cfg.innovation.nu == 3
    assert cfg.K is not None and cfg.K.interior(cfg.theta0.theta)
    assert cfg.n_grid == (2000, 8000, 32000) and cfg.replications == 200
    for bad, field in [({"n_grid": [100, 100]}, "n_grid"),
                       ({"theta0.alpha": [0.1, 6.0]}, "theta0.alpha"),  # outside K
                       ({"base_seed": -1}, "base_seed"),
                       ({"record_timing": 1}, "record_timing")]:
        raw = {"theta0.alpha": [0.1, 0.1], "theta0.beta": [0.8], **bad}
        with pytest.raises(ConfigError) as ei:
            config_from_mapping(raw, "rate")
        assert ei.value.field == field
    with pytest.raises(ConfigError):
        config_from_mapping({"kind": "fit", "theta0.alpha": [0.1, 0.1]}, "rate")
    assert all(isinstance(v, str) for v in KNOWN_KEYS.values())


def test_relative_inputs_resolve_against_config_dir(tmp_path):
    sub = tmp_path / "sub"
    sub.mkdir()
    (sub / "cfg.txt").write_text("tails.input = data.txt\n")
    cfg = load_config(sub / "cfg.txt", "tails")
    assert cfg.tails_input == sub / "data.txt"


# -- exit codes --------------------------------------------------------------


def test_missing_theta_exits_1(tmp_path, capsys):
    p = tmp_path / "cfg.txt"
    p.write_text("n_grid = [500]\n")
    assert run(["simulate", "--config", p, "--out", tmp_path / "o"]) == 1
    assert "theta0.alpha" in capsys.readouterr().err


def test_usage_errors_exit_1(tmp_path, capsys):
    assert run(["bogus", "--config", "x"]) == 1
    assert run(["simulate"]) == 1
    assert run(["simulate", "--config", tmp_path / "missing.txt"]) == 1


def test_explosive_simulate_exits_2(tmp_path, capsys):
    p = tmp_path / "cfg.txt"
    p.write_text("theta0.alpha = [0.1, 3.0]\ntheta0.beta = [0.5]\nn_grid = [500]\n")
    assert run(["simulate", "--config", p, "--out", tmp_path / "o"]) == 2
    assert "rho_hat" in capsys.readouterr().err


def test_sandwich_rejects_student_t3(tmp_path, capsys):
    p = write_cfg(tmp_path, family="student_t", extra="innovation.nu = 3")
    assert run(["sandwich", "--config", p, "--out", tmp_path / "o"]) == 2
    assert "E Z^4 = infinity" in capsys.readouterr().err


# -- every subcommand, byte-identical reruns -----------------------------------


def _cfg_for(kind, tmp_path):
    if kind == "tails":
        data = np.random.default_rng(1).standard_t(3, 3000)
        np.savetxt(tmp_path / "tails.txt", data)
        p = tmp_path / "tails.cfg"
        p.write_text("tails.input = tails.txt\n")
        return p
    if kind in ("stable-limit", "mt-sums"):
        return write_cfg(tmp_path, f"{kind}.cfg", family="student_t", extra="innovation.nu = 3",
                         n_grid="[600]", reps=30)
    if kind == "fit":
        return write_cfg(tmp_path, "fit.cfg", n_grid="[800]")
    return write_cfg(tmp_path, f"{kind}.cfg")


OUTPUTS = {
    "simulate": {"path.csv"},
    "fit": {"fit.json"},
    "rate": {"rate.csv", "rate_summary.json"},
    "stable-limit": {"stable_limit.csv", "stable_limit.json"},
    "mt-sums": {"mt_sums.csv", "mt_sums.json"},
    "lyapunov": {"lyapunov.json"},
    "sre-check": {"sre_check.json"},
    "tails": {"tails.json", "tails_sweep.csv"},
    "sandwich": {"sandwich.json"},
}


@pytest.mark.parametrize("kind", sorted(OUTPUTS))
def test_subcommand_runs_and_is_byte_identical(kind, tmp_path, capsys):
    cfg = _cfg_for(kind, tmp_path)
    trees = []
    for i, threads in enumerate((1, 1, 2)):
        out = tmp_path / f"out{i}"
        assert run([kind, "--config", cfg, "--out", out, "--threads", threads]) == 0
        trees.append(read_tree(out))
    assert set(trees[0]) == OUTPUTS[kind]
    assert trees[0] == trees[1] == trees[2]
    line = capsys.readouterr().out
    assert line.startswith(kind)


def test_seed_flag_changes_output(tmp_path):
    cfg = write_cfg(tmp_path)
    assert run(["simulate", "--config", cfg, "--out", tmp_path / "a"]) == 0
    assert run(["simulate", "--config", cfg, "--out", tmp_path / "b", "--seed", 8]) == 0
    assert run(["simulate", "--config", cfg, "--out", tmp_path / "c", "--seed", 7]) == 0
    a, b, c = (read_tree(tmp_path / s) for s in "abc")
    assert a != b and a == c


def test_fit_from_data_file(tmp_path):
    x = np.random.default_rng(3).standard_normal(400)
    np.savetxt(tmp_path / "x.txt", x)
    cfg = tmp_path / "fit.cfg"
    cfg.write_text("data.input = x.txt\n")
    assert run(["fit", "--config", cfg, "--out", tmp_path / "o"]) == 0
    rep = json.loads((tmp_path / "o" / "fit.json").read_text())
    assert rep["n"] == 400 and len(rep["theta_hat"]["alpha"]) == 2


def test_rate_csv_round_trip_reproduces_summary(tmp_path):
    cfg = write_cfg(tmp_path)
    assert run(["rate", "--config", cfg, "--out", tmp_path / "o"]) == 0
    rows, names = read_rate_csv(tmp_path / "o" / "rate.csv")
    assert names == ("alpha0", "alpha1", "beta1")
    summary = json.loads((tmp_path / "o" / "rate_summary.json").read_text())
    again = json.loads(json.dumps(summarize_rate(rows), sort_keys=True))
    for key, value in again.items():
        assert summary[key] == value
    assert len(rows) == 6 and all(r.runtime_ms is None for r in rows)


def test_rate_single_cell_has_no_slope(tmp_path):
    cfg = write_cfg(tmp_path, n_grid="[300]", reps=1)
    assert run(["rate", "--config", cfg, "--out", tmp_path / "o"]) == 0
    summary = json.loads((tmp_path / "o" / "rate_summary.json").read_text())
    assert summary["rows"] == 1 and summary["slope_available"] is False and summary["slope"] is None


def test_record_timing_fills_runtime(tmp_path):
    cfg = write_cfg(tmp_path, n_grid="[300]", reps=2, more="record_timing = true\n")
    assert run(["rate", "--config", cfg, "--out", tmp_path / "o"]) == 0
    rows, _ = read_rate_csv(tmp_path / "o" / "rate.csv")
    assert all(r.runtime_ms is not None and r.runtime_ms > 0 for r in rows)


def test_thread_precedence(tmp_path, monkeypatch):
    from stablegarch import cli

    seen = []
    real = cli._COMMANDS["lyapunov"]

    def spy(cfg, out):
        seen.append(cfg.threads)
        return real(cfg, out)

    monkeypatch.setitem(cli._COMMANDS, "lyapunov", spy)
    cfg = write_cfg(tmp_path, more="threads = 3\n")
    out = tmp_path / "o"
    monkeypatch.delenv("STABLEGARCH_THREADS", raising=False)
    assert run(["lyapunov", "--config", cfg, "--out", out]) == 0
    monkeypatch.setenv("STABLEGARCH_THREADS", "2")
    assert run(["lyapunov", "--config", cfg, "--out", out]) == 0
    assert run(["lyapunov", "--config", cfg, "--out", out, "--threads", "1"]) == 0
    assert seen == [3, 2, 1]
    monkeypatch.setenv("STABLEGARCH_THREADS", "many")
    assert run(["lyapunov", "--config", cfg, "--out", out]) == 1


def test_json_has_no_nan_tokens(tmp_path):
    cfg = write_cfg(tmp_path, family="student_t", extra="innovation.nu = 3", n_grid="[600]", reps=30)
    assert run(["mt-sums", "--config", cfg, "--out", tmp_path / "o"]) == 0
    text = (tmp_path / "o" / "mt_sums.json").read_text()
    assert "NaN" not in text and "Infinity" not in text
    json.loads(text)
