"""Experiment driver: sweeps over (sweep value x seed x method), one results
CSV row per run.

Per-run seeds derive from (base_seed, seed_index, role) through SeedSequence,
so runs are independent of execution order and sweep points share paired
environments and logs per seed. Rows are canonically sorted before writing,
which makes the output byte-stable under any worker count. The wallclock_ms
column is measured and therefore the only column excluded from the
byte-reproducibility guarantee.
"""
import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ExperimentConfig
from .dataset_io import build_semi_synth_env, load_real
from .errors import ConfigurationError
from .metrics import evaluate
from .policy import ArgmaxPolicy, LoggingPolicy
from .qmodel import ACTION_FEATURE, ACTION_ID, fit_qmodel
from .synthetic import SynthConfig, build_env
from .trainer import EstimatorSpec, train, tune_kappa

RESULT_COLUMNS = (
    "sweep_name", "sweep_value", "seed", "method", "kappa",
    "overall_value", "norm_overall", "value_per_existing", "norm_existing",
    "value_per_new", "norm_new", "new_action_mass", "wallclock_ms", "error",
)
RHO_COLUMNS = RESULT_COLUMNS[:-2] + ("feasible", "wallclock_ms", "error")

# these methods never choose new actions; their per-new values are reported null
NULL_PER_NEW_METHODS = frozenset({"logging", "reg_a", "ips", "dr"})

JOBS_ENV_VAR = "FACTORED_OPL_JOBS"


def derive_seed(base_seed: int, *path: int) -> int:
    seq = np.random.SeedSequence((int(base_seed),) + tuple(int(p) for p in path))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _apply_sweep(config: ExperimentConfig, sweep_value):
    """Return (env config, n_train) for one sweep point."""
    env_cfg = config.env
    n_train = config.n_train
    name = config.sweep_name
    if name == "n":
        n_train = int(sweep_value)
    elif name == "new_pct":
        env_cfg = replace(env_cfg, new_action_fraction=float(sweep_value) / 100.0)
    elif name == "gamma":
        if not isinstance(env_cfg, SynthConfig):
            raise ConfigurationError("gamma sweep requires a synthetic env")
        env_cfg = replace(env_cfg, gamma=float(sweep_value))
    elif name in ("none", "rho_l"):
        pass
    return env_cfg, n_train


def build_run_env(config: ExperimentConfig, sweep_value, seed_index: int):
    """Environment and logged data for one (sweep value, seed) cell."""
    env_cfg, n_train = _apply_sweep(config, sweep_value)
    env_seed = derive_seed(config.base_seed, seed_index, 0)
    log_seed = derive_seed(config.base_seed, seed_index, 1)
    if isinstance(env_cfg, SynthConfig):
        env = build_env(replace(env_cfg, seed=env_seed))
    else:
        spec = load_real(
            env_cfg.users, env_cfg.items, env_cfg.rewards,
            s=env_cfg.s, clip_quantile=env_cfg.clip_quantile, cards=env_cfg.cards,
        )
        env = build_semi_synth_env(
            spec, beta=env_cfg.beta,
            new_action_fraction=env_cfg.new_action_fraction, seed=env_seed,
        )
    data = env.generate_log(n_train, log_seed)
    return env, data


def _build_policy(method: str, env, data, config: ExperimentConfig, seed_index: int):
    """Return (policy-like, kappa, note) for one method."""
    trainer_cfg = replace(config.trainer, seed=derive_seed(config.base_seed, seed_index, 2))
    eval_cfg = config.evaluation
    if method == "logging":
        return LoggingPolicy(env), None, ""
    if method in ("reg_a", "reg_f"):
        kind = ACTION_ID if method == "reg_a" else ACTION_FEATURE
        model = fit_qmodel(data, kind, ridge_lambda=trainer_cfg.ridge_lambda)
        policy = model.to_policy(
            temperature=eval_cfg.temperature,
            partition=data.partition,
            argmax=eval_cfg.argmax,
        )
        return policy, None, ""
    if method in ("ips", "dr", "pi", "lcpi"):
        # the conventional baselines are trained in the per-action class,
        # the feature-based estimators in the shared-feature class
        kind = "per_action" if method in ("ips", "dr") else "feature"
        result = train(EstimatorSpec(method), data, trainer_cfg,
                       gamma_source=env, policy_kind=kind)
        policy = ArgmaxPolicy(result.policy) if eval_cfg.argmax else result.policy
        return policy, None, ""
    if method == "pona":
        result = tune_kappa(data, trainer_cfg, env.partition, env)
        policy = ArgmaxPolicy(result.policy) if eval_cfg.argmax else result.policy
        note = "" if result.feasible else "infeasible: no kappa met the mass constraints"
        return policy, result.kappa, note
    raise ConfigurationError(f"unknown method {method!r}")


def _metrics_fields(report, method: str) -> dict:
    null_new = method in NULL_PER_NEW_METHODS
    return {
        "overall_value": report.overall_value,
        "norm_overall": report.norm_overall,
        "value_per_existing": report.value_per_existing,
        "norm_existing": report.norm_existing,
        "value_per_new": None if null_new else report.value_per_new,
        "norm_new": None if null_new else report.norm_new,
        "new_action_mass": report.new_action_mass,
    }


def run_unit(config: ExperimentConfig, sweep_value, seed_index: int, method: str) -> dict:
    """One results row; failures are recorded in the row, never raised."""
    row = {
        "sweep_name": config.sweep_name,
        "sweep_value": sweep_value,
        "seed": seed_index,
        "method": method,
        "kappa": None,
        "error": "",
    }
    start = time.perf_counter()
    try:
        env, data = build_run_env(config, sweep_value, seed_index)
        policy, kappa, note = _build_policy(method, env, data, config, seed_index)
        report = evaluate(
            policy, env,
            n_eval_contexts=config.evaluation.n_eval_contexts,
            seed=derive_seed(config.base_seed, seed_index, 3),
        )
        row["kappa"] = kappa
        row.update(_metrics_fields(report, method))
        if note:
            row["error"] = note
    except Exception as exc:  # recorded, sweep continues
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["wallclock_ms"] = int((time.perf_counter() - start) * 1000)
    return row


def run_rho_unit(config: ExperimentConfig, rho_lower, seed_index: int) -> dict:
    """One constrained-tuning row for a lower bound on new-action mass."""
    row = {
        "sweep_name": "rho_l",
        "sweep_value": rho_lower,
        "seed": seed_index,
        "method": "pona",
        "kappa": None,
        "feasible": None,
        "error": "",
    }
    start = time.perf_counter()
    try:
        env, data = build_run_env(config, rho_lower, seed_index)
        trainer_cfg = replace(
            config.trainer,
            seed=derive_seed(config.base_seed, seed_index, 2),
            rho_lower=float(rho_lower),
        )
        result = tune_kappa(data, trainer_cfg, env.partition, env)
        policy = ArgmaxPolicy(result.policy) if config.evaluation.argmax else result.policy
        report = evaluate(
            policy, env,
            n_eval_contexts=config.evaluation.n_eval_contexts,
            seed=derive_seed(config.base_seed, seed_index, 3),
        )
        row["kappa"] = result.kappa
        row["feasible"] = result.feasible
        row.update(_metrics_fields(report, "pona"))
    except Exception as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["wallclock_ms"] = int((time.perf_counter() - start) * 1000)
    return row


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        if np.isinf(value):
            return "-inf" if value < 0 else "inf"
        return f"{value:.17g}"
    return str(value)


def _sort_key(row: dict):
    kappa = row.get("kappa")
    return (
        row["sweep_name"],
        float(row["sweep_value"]),
        int(row["seed"]),
        row["method"],
        -1.0 if kappa is None else float(kappa),
    )


def write_rows(rows: list, path, columns=RESULT_COLUMNS) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = sorted(rows, key=_sort_key)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row.get(col)) for col in columns])


def resolve_jobs(jobs: Optional[int]) -> int:
    if jobs is not None:
        return max(1, int(jobs))
    env_value = os.environ.get(JOBS_ENV_VAR)
    if env_value:
        return max(1, int(env_value))
    return 1


def _map_units(worker, tasks, jobs: int) -> list:
    if jobs <= 1:
        return [worker(*task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_star, [(worker,) + task for task in tasks]))


def _star(packed):
    worker = packed[0]
    return worker(*packed[1:])


def run_experiment(config: ExperimentConfig, jobs: Optional[int] = None,
                   output: Optional[str] = None) -> Path:
    """Run the full sweep and write the results CSV; returns its path."""
    tasks = [
        (config, value, seed, method)
        for value in config.sweep_values
        for seed in range(config.seeds)
        for method in config.methods
    ]
    rows = _map_units(run_unit, tasks, resolve_jobs(jobs))
    out = Path(output or config.output)
    write_rows(rows, out, RESULT_COLUMNS)
    return out


def run_sweep_rho(config: ExperimentConfig, jobs: Optional[int] = None,
                  output: Optional[str] = None) -> Path:
    """Constrained-kappa sweep over lower bounds (sweep.values are the bounds)."""
    tasks = [
        (config, value, seed)
        for value in config.sweep_values
        for seed in range(config.seeds)
    ]
    rows = _map_units(run_rho_unit, tasks, resolve_jobs(jobs))
    out = Path(output or config.output)
    write_rows(rows, out, RHO_COLUMNS)
    return out
