import subprocess
import sys
from pathlib import Path

import pytest

from opl_plots import load_results, render, render_all
from opl_plots.cli import main as cli_main

REPO_ROOT = Path(__file__).resolve().parents[2]

HEADER = ("sweep_name,sweep_value,seed,method,kappa,overall_value,norm_overall,"
          "value_per_existing,norm_existing,value_per_new,norm_new,"
          "new_action_mass,wallclock_ms,error")


def results_csv(tmp_path, sweep_name="n", values=(500, 1000), name="results.csv"):
    """Hand-built CSV following the documented runner schema."""
    rows = [HEADER]
    for value in values:
        for seed in (0, 1, 2):
            for method in ("logging", "reg_a", "ips", "dr", "reg_f", "lcpi", "pona"):
                shift = 0.01 * seed + (0.1 if method in ("dr", "pona") else 0.0)
                per_new = "" if method in ("logging", "reg_a", "ips", "dr") else f"{3.1 + shift:.3f}"
                norm_new = "" if per_new == "" else f"{1.05 + shift:.3f}"
                kappa = "0.5" if method == "pona" else ""
                mass = 0.0 if method in ("logging", "reg_a") else 0.05 + shift
                rows.append(
                    f"{sweep_name},{value},{seed},{method},{kappa},"
                    f"{3.2 + shift:.3f},{1.1 + shift:.3f},{3.3 + shift:.3f},{1.2 + shift:.3f},"
                    f"{per_new},{norm_new},{mass:.3f},12,"
                )
    path = tmp_path / name
    path.write_text("\n".join(rows) + "\n")
    return path


def rho_csv(tmp_path):
    header = HEADER.replace(",wallclock_ms,", ",feasible,wallclock_ms,")
    rows = [header]
    for value, mass in (("-inf", 0.05), ("0.1", 0.12), ("0.3", 0.31)):
        for seed in (0, 1):
            rows.append(
                f"rho_l,{value},{seed},pona,0.5,3.2,1.1,3.3,1.2,3.1,1.05,"
                f"{mass + 0.01 * seed},true,10,"
            )
    path = tmp_path / "rho.csv"
    path.write_text("\n".join(rows) + "\n")
    return path


def test_render_value_families(tmp_path):
    csv = results_csv(tmp_path)
    for family in ("n", "newpct", "gamma"):
        result = render(csv, family, tmp_path / "figs")
        assert result.path.exists() and result.path.stat().st_size > 0


def test_per_new_panel_excludes_restricted_methods(tmp_path):
    result = render(results_csv(tmp_path), "n", tmp_path / "figs")
    assert set(result.panel_methods["norm_new"]) == {"reg_f", "lcpi", "pona"}
    assert set(result.panel_methods["norm_overall"]) == {
        "logging", "reg_a", "ips", "dr", "reg_f", "lcpi", "pona"
    }


def test_render_rho_family_with_infinite_bound(tmp_path):
    result = render(rho_csv(tmp_path), "rho", tmp_path / "figs")
    assert result.path.exists()
    assert result.panel_methods["new_action_mass"] == ["pona"]


def test_single_seed_renders_without_error_bars(tmp_path):
    csv = results_csv(tmp_path, values=(100,))
    lines = csv.read_text().splitlines()
    kept = [lines[0]] + [l for l in lines[1:] if ",0,logging," in l or ",0,lcpi," in l]
    single = tmp_path / "single.csv"
    single.write_text("\n".join(kept) + "\n")
    result = render(single, "n", tmp_path / "figs")
    assert result.path.exists()


def test_missing_column_is_named(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("sweep_name,sweep_value,seed,method\nn,1,0,dr\n")
    with pytest.raises(ValueError, match="norm_overall"):
        render(bad, "n", tmp_path)


def test_error_rows_are_dropped_with_warning(tmp_path):
    csv = results_csv(tmp_path)
    lines = csv.read_text().splitlines()
    broken = lines[1].rsplit(",", 1)[0] + ",RuntimeError: boom"
    csv.write_text("\n".join([lines[0], broken] + lines[2:]) + "\n")
    with pytest.warns(UserWarning, match="error row"):
        frame = load_results(csv)
    assert (frame["error"].fillna("") == "").all()


def test_unknown_family_rejected(tmp_path):
    with pytest.raises(ValueError):
        render(results_csv(tmp_path), "volcano", tmp_path)


def test_cli_renders_and_reports(tmp_path):
    csv = results_csv(tmp_path)
    assert cli_main([str(csv), "--figure", "all", "--out", str(tmp_path / "o")]) == 0
    for family in ("n", "newpct", "gamma", "rho"):
        assert (tmp_path / "o" / f"figure_{family}.png").exists()
    assert cli_main([str(tmp_path / "missing.csv"), "--figure", "n"]) == 1


def acceptance_csv(tmp_path):
    """The primary acceptance run's CSV when present, else a fresh reduced
    run through the runner CLI (the only interface this package consumes)."""
    real = REPO_ROOT / "results" / "ordering.csv"
    if real.exists():
        return real
    config = tmp_path / "tiny.yaml"
    config.write_text("""\
env:
  kind: synthetic
  cards: [2, 2, 2]
  s: 2
  context_dim: 3
  new_action_fraction: 0.375
methods: [logging, reg_a, reg_f, ips, dr, pi, lcpi, pona]
sweep:
  name: n
  values: [100]
seeds: 2
trainer:
  learning_rate: 0.1
  iterations: 10
  kappa_grid: [0.0, 1.0]
evaluation:
  n_eval_contexts: 100
output: tiny.csv
""")
    subprocess.run(
        [sys.executable, "-m", "factored_opl", "run", str(config)],
        check=True, capture_output=True,
    )
    return tmp_path / "tiny.csv"


def test_renders_runner_output_end_to_end(tmp_path):
    # all four families render from the ordering run's CSV without error,
    # and the restricted methods stay off the per-new panels
    csv = acceptance_csv(tmp_path)
    results = render_all(csv, tmp_path / "figs")
    assert len(results) == 4
    for result in results:
        assert result.path.exists() and result.path.stat().st_size > 0
        for method in ("logging", "reg_a", "ips", "dr"):
            assert method not in result.panel_methods.get("norm_new", [])
