import csv
import math
import os

import pytest

from dfrc_hbf.harness import (
    ConfigError,
    ExperimentConfig,
    emit_convergence_trace,
    parse_config,
    parse_config_text,
    run_experiment,
)
from dfrc_hbf.algorithms import ConvergenceTrace
from dfrc_hbf.harness.cli import main
from dfrc_hbf.harness.runner import RESULT_COLUMNS, TIMING_COLUMN, fmt

TINY = """
[experiment]
baselines = [dps, sps, fully-digital]
trials = 2
seed = 7
[system]
n_tx = 8
n_rf = 2
n_rx = 2
n_rad = 2
n_streams = 2
n_subpulses = 2
n_path = 4
[scene]
target_length = 2
n_clutter = 2
clutter_length = 2
[solver]
max_inner_iter = 15
max_outer_iter = 2
"""


def _write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------- config


def test_empty_file_gives_defaults(tmp_path):
    cfg = parse_config(_write(tmp_path, ""))
    assert cfg == ExperimentConfig()
    assert (cfg.n_tx, cfg.n_rad, cfg.n_streams, cfg.n_subpulses, cfg.n_path) == (32, 4, 4, 16, 16)
    assert (cfg.noise_var_comm, cfg.noise_var_radar, cfg.energy_budget) == (0.1, 0.1, 10.0)
    assert (cfg.target_length, cfg.target_power, cfg.target_shape) == (6, 10.0, 15.0)
    assert (cfg.n_clutter, cfg.clutter_length, cfg.clutter_power, cfg.clutter_shape) == (31, 8, 1.0, 1.2)
    assert (cfg.rho1, cfg.rho2, cfg.gamma_db) == (20.0, 20.0, (12.0,))


def test_gamma_sweep_has_four_points():
    cfg = parse_config_text("gamma_db = [4, 8, 12, 16]")
    assert cfg.sweep == ("gamma_db", (4.0, 8.0, 12.0, 16.0))
    assert [p["gamma_db"] for p in cfg.points()] == [4.0, 8.0, 12.0, 16.0]


def test_n_rf_sweep_caps_streams():
    cfg = parse_config_text("[system]\nn_rf = [2, 4, 8]")
    assert [cfg.system_config(p).n_streams for p in cfg.points()] == [2, 4, 4]


def test_comments_and_sections():
    cfg = parse_config_text("# c\n; c\n[experiment]\ntrials = 3  # inline\n[solver]\nrho1 = 5")
    assert cfg.trials == 3 and cfg.rho1 == 5.0


@pytest.mark.parametrize(
    "text, key, line",
    [
        ("[system]\nn_tx = 30\nn_rf = 4", "n_tx", 2),
        ("bogus = 1", "bogus", 1),
        ("\ntrials = 2.5", "trials", 2),
        ("trials = 0", "trials", 1),
        ("[scene]\nn_tx = 8", "n_tx", 2),
        ("trials = 1\ntrials = 2", "trials", 2),
        ("gamma_db = [4, 8]\nn_rf = [2, 4]", "n_rf", 2),
        ("gamma_db = []", "gamma_db", 1),
        ("baselines = [dps, analog]", "baselines", 1),
        ("scenario = mimo", "scenario", 1),
        ("energy_budget = -1", "energy_budget", 1),
        ("scenario = mu-miso\nn_users = 6", "n_users", 2),
        ("record_timing = maybe", "record_timing", 1),
    ],
)
def test_config_errors_name_key_and_line(text, key, line):
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    assert info.value.key == key and info.value.line == line
    assert f"key '{key}'" in str(info.value) and f"line {line}" in str(info.value)


def test_divisibility_message():
    with pytest.raises(ConfigError, match="n_tx not divisible by n_rf"):
        parse_config_text("n_tx = 30\nn_rf = 4")


def test_malformed_lines():
    for text in ("[system", "[nope]", "just words", "trials ="):
        with pytest.raises(ConfigError):
            parse_config_text(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(str(tmp_path / "absent.cfg"))


# ---------------------------------------------------------------- traces


def test_empty_trace_is_header_only(tmp_path):
    path = tmp_path / "t.csv"
    emit_convergence_trace(ConvergenceTrace(), path)
    assert path.read_text() == ",".join(ConvergenceTrace.COLUMNS) + "\n"


def test_fmt_round_trips_floats():
    for x in (0.1, 1 / 3, 123456.789012345678, 5e-324, -2.5e300):
        assert float(fmt(x)) == x
    assert fmt(True) == "true" and fmt(3) == "3"


# ---------------------------------------------------------------- runs


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = parse_config_text(TINY)
    return cfg, run_experiment(cfg, out_dir=str(out))


def test_rows_and_files(tiny_run):
    cfg, result = tiny_run
    rows = _read_csv(os.path.join(result.out_dir, "results.csv"))
    assert len(rows) == 3 * 2
    assert list(rows[0].keys()) == list(RESULT_COLUMNS)
    assert [(r["baseline"], r["trial"]) for r in rows] == [
        (b, str(t)) for b in ("dps", "sps", "fully-digital") for t in range(2)
    ]
    traces = [f for f in os.listdir(result.out_dir) if f.startswith("trace_")]
    assert len(traces) == 6
    assert os.path.exists(os.path.join(result.out_dir, "summary.txt"))


def test_trace_final_se_matches_rows(tiny_run):
    _, result = tiny_run
    rows = _read_csv(os.path.join(result.out_dir, "results.csv"))
    for row in rows:
        name = f"trace_p000_{row['baseline']}_t{int(row['trial']):04d}.csv"
        trace = _read_csv(os.path.join(result.out_dir, name))
        assert abs(float(trace[-1]["sum_se"]) - float(row["sum_se"])) <= 1e-10 * max(1, float(row["sum_se"]))


def test_summary_statistics(tiny_run):
    _, result = tiny_run
    for entry in result.summary:
        se = [r["sum_se"] for r in result.rows if r["baseline"] == entry["baseline"] and r["feasible"]]
        assert entry["feasible"] == len(se)
        if se:
            assert math.isclose(entry["mean_sum_se"], sum(se) / len(se), rel_tol=1e-12)


def test_single_solve_gives_one_row(tmp_path):
    cfg = parse_config_text(TINY.replace("baselines = [dps, sps, fully-digital]", "baselines = [dps]").replace("trials = 2", "trials = 1"))
    result = run_experiment(cfg, out_dir=str(tmp_path))
    assert len(result.rows) == 1


def test_same_seed_byte_identical(tmp_path):
    cfg = parse_config_text(TINY)
    a = run_experiment(cfg, out_dir=str(tmp_path / "a"))
    b = run_experiment(cfg, out_dir=str(tmp_path / "b"), jobs=2)
    for name in sorted(os.listdir(a.out_dir)):
        with open(os.path.join(a.out_dir, name), "rb") as fa, open(os.path.join(b.out_dir, name), "rb") as fb:
            assert fa.read() == fb.read(), name


def test_seed_override_changes_output(tmp_path):
    cfg = parse_config_text(TINY)
    a = run_experiment(cfg, out_dir=str(tmp_path / "a"))
    b = run_experiment(cfg, out_dir=str(tmp_path / "b"), seed=8)
    assert [r["sum_se"] for r in a.rows] != [r["sum_se"] for r in b.rows]


def test_timing_column_opt_in(tmp_path):
    cfg = parse_config_text(TINY.replace("trials = 2", "trials = 1\nrecord_timing = true"))
    result = run_experiment(cfg, out_dir=str(tmp_path))
    rows = _read_csv(os.path.join(result.out_dir, "results.csv"))
    assert list(rows[0].keys()) == list(RESULT_COLUMNS) + [TIMING_COLUMN]


def test_mu_miso_run(tmp_path):
    text = TINY.replace("[experiment]", "[experiment]\nscenario = mu-miso\nn_users = [1, 2]")
    result = run_experiment(parse_config_text(text), out_dir=str(tmp_path))
    rows = _read_csv(os.path.join(result.out_dir, "results.csv"))
    assert len(rows) == 2 * 3 * 2
    for r in rows:
        if r["status"] == "ok":
            assert len(r["per_user_se"].split(";")) == int(r["n_users"])


# ---------------------------------------------------------------- CLI


def test_cli_validate(tmp_path, capsys):
    assert main(["validate", "--config", _write(tmp_path, TINY)]) == 0
    assert "6 solves" in capsys.readouterr().out
    assert main(["validate", "--config", _write(tmp_path, "n_tx = 30\nn_rf = 4", "bad.cfg")]) == 1
    assert "n_tx not divisible by n_rf" in capsys.readouterr().err


def test_cli_run_ok(tmp_path):
    path = _write(tmp_path, TINY.replace("trials = 2", "trials = 1"))
    assert main(["run", "--config", path, "--out", str(tmp_path / "o"), "--seed", "3"]) == 0
    assert os.path.exists(tmp_path / "o" / "results.csv")


def test_cli_universal_infeasibility(tmp_path):
    path = _write(tmp_path, TINY.replace("trials = 2", "trials = 1\ngamma_db = 90"))
    assert main(["run", "--config", path, "--out", str(tmp_path / "o")]) == 2
    rows = _read_csv(tmp_path / "o" / "results.csv")
    assert all(r["status"] == "threshold_infeasible" and r["feasible"] == "false" for r in rows)


def test_cli_bad_arguments(tmp_path):
    path = _write(tmp_path, TINY)
    assert main(["run", "--config", path, "--jobs", "0"]) == 1
    assert main(["run", "--config", path, "--seed", "-1"]) == 1
    with pytest.raises(SystemExit):
        main(["run"])
