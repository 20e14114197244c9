"""Experiment configuration: a YAML file with nested key-value blocks.

Top-level keys (see the repository README for the full grammar):

- ``env``: either a synthetic block (cards, s, context_dim, gamma, beta,
  noise_sigma, new_action_fraction, ...) or a real-data block (users,
  items, rewards paths, s, clip_quantile, beta, new_action_fraction).
- ``methods``: subset of {logging, reg_a, reg_f, ips, dr, pi, lcpi, pona}.
- ``sweep``: name in {n, new_pct, gamma, rho_l, none} plus values.
- ``seeds``: number of replicates; ``base_seed`` anchors derivation.
- ``trainer``: TrainConfig fields.
- ``evaluation``: n_eval_contexts, argmax, temperature.
- ``output``: results CSV path.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import yaml

from .errors import ConfigurationError
from .features import FeatureScheme
from .synthetic import SynthConfig
from .trainer import TrainConfig

METHODS = ("logging", "reg_a", "reg_f", "ips", "dr", "pi", "lcpi", "pona")
SWEEP_NAMES = ("n", "new_pct", "gamma", "rho_l", "none")


@dataclass(frozen=True)
class RealEnvConfig:
    users: str
    items: str
    rewards: str
    s: int
    clip_quantile: float = 0.99
    beta: float = 0.05
    new_action_fraction: float = 0.0
    cards: Optional[tuple] = None


@dataclass(frozen=True)
class EvalConfig:
    n_eval_contexts: int = 10_000
    argmax: bool = False
    temperature: float = 1.0


@dataclass(frozen=True)
class ExperimentConfig:
    env: Union[SynthConfig, RealEnvConfig]
    methods: tuple
    sweep_name: str
    sweep_values: tuple
    seeds: int
    n_train: int
    trainer: TrainConfig
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    base_seed: int = 12345
    output: str = "results.csv"

    def __post_init__(self):
        for m in self.methods:
            if m not in METHODS:
                raise ConfigurationError(f"methods: unknown method {m!r}")
        if not self.methods:
            raise ConfigurationError("methods: need at least one method")
        if self.sweep_name not in SWEEP_NAMES:
            raise ConfigurationError(
                f"sweep.name: must be one of {SWEEP_NAMES}, got {self.sweep_name!r}"
            )
        if not self.sweep_values:
            raise ConfigurationError("sweep.values: must be non-empty")
        if self.seeds < 1:
            raise ConfigurationError("seeds: must be >= 1")
        if self.n_train < 1:
            raise ConfigurationError("n_train: must be >= 1")


def _coerce_float(value, where: str) -> float:
    """YAML '-inf'/'inf' plain scalars load as strings; accept them as floats."""
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            raise ConfigurationError(f"{where}: expected a number, got {value!r}") from None
    if isinstance(value, (int, float)):
        return float(value)
    raise ConfigurationError(f"{where}: expected a number, got {value!r}")


def _take(block: dict, key: str, default=None, required: bool = False, where: str = ""):
    if key not in block:
        if required:
            raise ConfigurationError(f"{where}{key}: missing required key")
        return default
    return block.pop(key)


def _no_leftovers(block: dict, where: str) -> None:
    if block:
        raise ConfigurationError(f"{where}: unknown keys {sorted(block)}")


def _parse_env(block, base_dir: Path):
    if not isinstance(block, dict):
        raise ConfigurationError("env: must be a mapping")
    block = dict(block)
    kind = _take(block, "kind", default="synthetic")
    if kind == "synthetic":
        cards = _take(block, "cards", required=True, where="env.")
        s = int(_take(block, "s", required=True, where="env."))
        scheme = FeatureScheme(cards=tuple(int(m) for m in cards), s=s)
        cfg = SynthConfig(
            scheme=scheme,
            context_dim=int(_take(block, "context_dim", default=5)),
            gamma=_coerce_float(_take(block, "gamma", default=0.0), "env.gamma"),
            beta=_coerce_float(_take(block, "beta", default=0.05), "env.beta"),
            noise_sigma=_coerce_float(
                _take(block, "noise_sigma", default=1.0), "env.noise_sigma"
            ),
            new_action_fraction=_coerce_float(
                _take(block, "new_action_fraction", default=0.0),
                "env.new_action_fraction",
            ),
            q_offset=_coerce_float(_take(block, "q_offset", default=3.0), "env.q_offset"),
            full_term_range=_coerce_float(
                _take(block, "full_term_range", default=0.5), "env.full_term_range"
            ),
        )
        _no_leftovers(block, "env")
        return cfg
    if kind == "real":
        cards = _take(block, "cards")
        cfg = RealEnvConfig(
            users=str(base_dir / _take(block, "users", required=True, where="env.")),
            items=str(base_dir / _take(block, "items", required=True, where="env.")),
            rewards=str(base_dir / _take(block, "rewards", required=True, where="env.")),
            s=int(_take(block, "s", required=True, where="env.")),
            clip_quantile=_coerce_float(
                _take(block, "clip_quantile", default=0.99), "env.clip_quantile"
            ),
            beta=_coerce_float(_take(block, "beta", default=0.05), "env.beta"),
            new_action_fraction=_coerce_float(
                _take(block, "new_action_fraction", default=0.0),
                "env.new_action_fraction",
            ),
            cards=None if cards is None else tuple(int(m) for m in cards),
        )
        _no_leftovers(block, "env")
        return cfg
    raise ConfigurationError(f"env.kind: must be 'synthetic' or 'real', got {kind!r}")


def _parse_trainer(block) -> TrainConfig:
    if block is None:
        return TrainConfig()
    if not isinstance(block, dict):
        raise ConfigurationError("trainer: must be a mapping")
    block = dict(block)
    optimizer = _take(block, "optimizer", default="adam")
    if optimizer == "adaptive_moment":
        optimizer = "adam"
    kwargs = dict(
        learning_rate=_coerce_float(
            _take(block, "learning_rate", default=0.01), "trainer.learning_rate"
        ),
        iterations=int(_take(block, "iterations", default=200)),
        optimizer=optimizer,
        seed=int(_take(block, "seed", default=0)),
        validation_fraction=_coerce_float(
            _take(block, "validation_fraction", default=0.5),
            "trainer.validation_fraction",
        ),
        rho_lower=_coerce_float(_take(block, "rho_lower", default="-inf"), "trainer.rho_lower"),
        rho_upper=_coerce_float(_take(block, "rho_upper", default="inf"), "trainer.rho_upper"),
    )
    batch = _take(block, "batch_size")
    if batch is not None:
        kwargs["batch_size"] = int(batch)
    grid = _take(block, "kappa_grid")
    if grid is not None:
        kwargs["kappa_grid"] = tuple(
            _coerce_float(k, "trainer.kappa_grid") for k in grid
        )
    lam = _take(block, "ridge_lambda")
    if lam is not None:
        kwargs["ridge_lambda"] = _coerce_float(lam, "trainer.ridge_lambda")
    _no_leftovers(block, "trainer")
    return TrainConfig(**kwargs)


def _parse_evaluation(block) -> EvalConfig:
    if block is None:
        return EvalConfig()
    if not isinstance(block, dict):
        raise ConfigurationError("evaluation: must be a mapping")
    block = dict(block)
    cfg = EvalConfig(
        n_eval_contexts=int(_take(block, "n_eval_contexts", default=10_000)),
        argmax=bool(_take(block, "argmax", default=False)),
        temperature=_coerce_float(
            _take(block, "temperature", default=1.0), "evaluation.temperature"
        ),
    )
    _no_leftovers(block, "evaluation")
    return cfg


def load_config(path) -> ExperimentConfig:
    """Parse and validate a config file; every error names the offending key."""
    path = Path(path)
    with path.open() as handle:
        raw = yaml.safe_load(handle)
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    base_dir = path.parent
    raw = dict(raw)

    env = _parse_env(_take(raw, "env", required=True, where=""), base_dir)

    methods = _take(raw, "methods", default=list(METHODS))
    if not isinstance(methods, (list, tuple)):
        raise ConfigurationError("methods: must be a list")

    sweep = _take(raw, "sweep", default={"name": "none", "values": [0]})
    if not isinstance(sweep, dict) or "name" not in sweep or "values" not in sweep:
        raise ConfigurationError("sweep: must be a mapping with 'name' and 'values'")
    sweep_name = str(sweep["name"])
    values = sweep["values"]
    if not isinstance(values, (list, tuple)):
        raise ConfigurationError("sweep.values: must be a list")
    if sweep_name == "n":
        sweep_values = tuple(int(v) for v in values)
    else:
        sweep_values = tuple(_coerce_float(v, "sweep.values") for v in values)

    output = _take(raw, "output", default="results.csv")
    cfg = ExperimentConfig(
        env=env,
        methods=tuple(methods),
        sweep_name=sweep_name,
        sweep_values=sweep_values,
        seeds=int(_take(raw, "seeds", default=1)),
        n_train=int(_take(raw, "n_train", default=2000)),
        trainer=_parse_trainer(_take(raw, "trainer")),
        evaluation=_parse_evaluation(_take(raw, "evaluation")),
        base_seed=int(_take(raw, "base_seed", default=12345)),
        output=str(base_dir / output),
    )
    _no_leftovers(raw, "config")
    return cfg
