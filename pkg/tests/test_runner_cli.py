import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import factored_opl as fo
from factored_opl.cli import main as cli_main
from factored_opl.runner import RESULT_COLUMNS, RHO_COLUMNS, run_experiment, run_sweep_rho

TINY_CONFIG = """\
env:
  kind: synthetic
  cards: [2, 2, 2]
  s: 2
  context_dim: 3
  gamma: 0.0
  beta: 0.05
  noise_sigma: 0.5
  new_action_fraction: 0.375
methods: {methods}
sweep:
  name: {sweep_name}
  values: {values}
seeds: {seeds}
n_train: 100
base_seed: 77
trainer:
  learning_rate: 0.1
  iterations: 8
  kappa_grid: [0.0, 1.0]
evaluation:
  n_eval_contexts: 200
output: {output}
"""


def write_tiny(tmp_path, methods="[logging, reg_a, ips, dr, pi, lcpi, pona]",
               values="[100, 200]", seeds=2, name="tiny.yaml", output="out.csv",
               sweep_name="n"):
    path = tmp_path / name
    path.write_text(TINY_CONFIG.format(methods=methods, values=values,
                                       seeds=seeds, output=output,
                                       sweep_name=sweep_name))
    return path


def read_csv(path):
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    return header, [dict(zip(header, line.split(","))) for line in lines[1:]]


def strip_wallclock(path):
    header, rows = read_csv(path)
    idx = header.index("wallclock_ms")
    out = []
    for row in Path(path).read_text().splitlines():
        cells = row.split(",")
        del cells[idx]
        out.append(",".join(cells))
    return "\n".join(out)


def test_row_count_single_method(tmp_path):
    cfg = fo.load_config(write_tiny(tmp_path, methods="[logging]", values="[50, 60, 70]", seeds=1))
    out = run_experiment(cfg)
    header, rows = read_csv(out)
    assert list(header) == list(RESULT_COLUMNS)
    assert len(rows) == 3


def test_rerun_byte_reproduces_all_but_wallclock(tmp_path):
    path = write_tiny(tmp_path, seeds=2, values="[100]")
    cfg = fo.load_config(path)
    first = run_experiment(cfg, output=str(tmp_path / "a.csv"))
    second = run_experiment(cfg, output=str(tmp_path / "b.csv"))
    assert strip_wallclock(first) == strip_wallclock(second)


def test_parallel_jobs_do_not_change_bytes(tmp_path):
    path = write_tiny(tmp_path, methods="[logging, dr]", values="[100]", seeds=2)
    cfg = fo.load_config(path)
    serial = run_experiment(cfg, jobs=1, output=str(tmp_path / "serial.csv"))
    parallel = run_experiment(cfg, jobs=2, output=str(tmp_path / "parallel.csv"))
    assert strip_wallclock(serial) == strip_wallclock(parallel)


def test_null_per_new_columns_for_restricted_methods(tmp_path):
    cfg = fo.load_config(write_tiny(tmp_path, values="[150]", seeds=1))
    _, rows = read_csv(run_experiment(cfg))
    for row in rows:
        assert row["error"] == ""
        if row["method"] in ("logging", "reg_a", "ips", "dr"):
            assert row["value_per_new"] == "" and row["norm_new"] == ""
        if row["method"] in ("lcpi", "pona"):
            assert row["value_per_new"] != ""
        if row["method"] == "pona":
            assert row["kappa"] != ""
        else:
            assert row["kappa"] == ""


def test_per_run_failures_become_error_rows(tmp_path):
    # gamma sweep over a real-data env is a per-unit configuration error
    fixture = fo.generate_fixture(tmp_path / "fx", seed=7)
    config = tmp_path / "bad.yaml"
    config.write_text(f"""\
env:
  kind: real
  users: {fixture['users']}
  items: {fixture['items']}
  rewards: {fixture['rewards']}
  s: 1
  new_action_fraction: 0.4
methods: [logging]
sweep:
  name: gamma
  values: [0.0, 1.0]
seeds: 1
trainer:
  iterations: 2
evaluation:
  n_eval_contexts: 50
output: bad.csv
""")
    cfg = fo.load_config(config)
    _, rows = read_csv(run_experiment(cfg))
    assert len(rows) == 2
    assert all("ConfigurationError" in row["error"] for row in rows)
    assert all(row["overall_value"] == "" for row in rows)


def test_real_env_end_to_end(tmp_path):
    fixture = fo.generate_fixture(tmp_path / "fx", seed=7)
    config = tmp_path / "real.yaml"
    config.write_text(f"""\
env:
  kind: real
  users: {fixture['users']}
  items: {fixture['items']}
  rewards: {fixture['rewards']}
  s: 1
  new_action_fraction: 0.4
methods: [logging, reg_f, lcpi]
sweep:
  name: n
  values: [150]
seeds: 1
trainer:
  learning_rate: 0.1
  iterations: 10
evaluation:
  n_eval_contexts: 300
output: real.csv
""")
    cfg = fo.load_config(config)
    _, rows = read_csv(run_experiment(cfg))
    assert len(rows) == 3
    assert all(row["error"] == "" for row in rows)
    logging_row = next(r for r in rows if r["method"] == "logging")
    assert float(logging_row["new_action_mass"]) == 0.0


def test_rho_sweep_columns_and_reference_row(tmp_path):
    path = write_tiny(tmp_path, methods="[pona]", values="[-inf, 0.4]", seeds=1,
                      sweep_name="rho_l")
    cfg = fo.load_config(path)
    out = run_sweep_rho(cfg, output=str(tmp_path / "rho.csv"))
    header, rows = read_csv(out)
    assert list(header) == list(RHO_COLUMNS)
    assert len(rows) == 2
    unconstrained = next(r for r in rows if r["sweep_value"] == "-inf")
    assert unconstrained["feasible"] == "true"

    # the -inf row reproduces the unconstrained run's pona metrics exactly
    run_cfg = fo.load_config(write_tiny(tmp_path, methods="[pona]", values="[100]",
                                        seeds=1, name="pona.yaml", output="pona.csv"))
    _, pona_rows = read_csv(run_experiment(run_cfg))
    for col in ("kappa", "overall_value", "norm_overall", "new_action_mass"):
        assert unconstrained[col] == pona_rows[0][col]


def test_rho_sweep_infeasible_is_recorded_not_fatal(tmp_path):
    path = write_tiny(tmp_path, methods="[pona]", values="[0.99]", seeds=1,
                      sweep_name="rho_l")
    cfg = fo.load_config(path)
    _, rows = read_csv(run_sweep_rho(cfg, output=str(tmp_path / "rho.csv")))
    assert rows[0]["feasible"] == "false"
    assert rows[0]["overall_value"] != ""


def test_cli_validate_and_error_exit(tmp_path):
    good = write_tiny(tmp_path)
    assert cli_main(["validate", str(good)]) == 0

    bad = tmp_path / "broken.yaml"
    bad.write_text("env:\n  kind: synthetic\n  cards: [2, 2]\n  s: 1\nmethods: [nonsense]\n")
    assert cli_main(["validate", str(bad)]) == 1
    assert cli_main(["validate", str(tmp_path / "missing.yaml")]) == 1


def test_cli_run_with_overrides(tmp_path):
    config = write_tiny(tmp_path, methods="[logging]", values="[50]", seeds=3)
    out = tmp_path / "override.csv"
    assert cli_main(["run", str(config), "--seeds", "1", "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert len(rows) == 1


def test_cli_gen_fixture(tmp_path):
    assert cli_main(["gen-fixture", str(tmp_path / "fx")]) == 0
    assert (tmp_path / "fx" / "users.csv").exists()


def test_jobs_env_var_honored_when_flag_absent(monkeypatch):
    from factored_opl.runner import resolve_jobs

    monkeypatch.delenv("FACTORED_OPL_JOBS", raising=False)
    assert resolve_jobs(None) == 1
    monkeypatch.setenv("FACTORED_OPL_JOBS", "3")
    assert resolve_jobs(None) == 3
    assert resolve_jobs(2) == 2  # explicit flag wins


def test_console_entry_point(tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "factored_opl", "validate",
         str(write_tiny(tmp_path))],
        capture_output=True, text=True,
    )
    assert result.returncode == 0
    assert "config ok" in result.stdout


def test_bundled_configs_validate():
    configs = Path(__file__).resolve().parents[1] / "configs"
    for name in ("ordering.yaml", "sweep_n.yaml", "sweep_new_pct.yaml",
                 "sweep_gamma.yaml", "sweep_rho.yaml", "real_fixture.yaml"):
        fo.load_config(configs / name)
