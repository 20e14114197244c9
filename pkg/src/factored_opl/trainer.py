"""Gradient-ascent policy optimization, OPE on validation data, and
constrained selection of the combination weight kappa."""
import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .data import LoggedDataset
from .errors import ConfigurationError, NumericError
from .estimators import (
    GammaProjection,
    GradientEstimate,
    grad_dr,
    grad_ips,
    grad_pona,
    grad_pseudoinverse,
)
from .features import LOCAL, MARGINAL, ActionPartition
from .policy import PerActionSoftmaxPolicy, SoftmaxFeaturePolicy
from .qmodel import ACTION_FEATURE, QModel, fit_qmodel

ESTIMATOR_NAMES = ("ips", "dr", "pi", "lcpi", "pona")


@dataclass(frozen=True)
class EstimatorSpec:
    """Which gradient estimator to train with (kappa only applies to pona)."""

    name: str
    kappa: Optional[float] = None

    def __post_init__(self):
        if self.name not in ESTIMATOR_NAMES:
            raise ConfigurationError(f"unknown estimator {self.name!r}")
        if self.name == "pona" and self.kappa is None:
            raise ConfigurationError("pona needs a kappa")


@dataclass(frozen=True)
class TrainConfig:
    """Optimization and tuning hyperparameters.

    ``optimizer`` is "adam" (adaptive-moment, the default) or "plain"
    gradient ascent. ``batch_size=None`` means full batch. ``rho_lower`` and
    ``rho_upper`` bound the learned policy's new-action probability mass
    during kappa selection; the infinite defaults reduce selection to a pure
    value argmax.
    """

    learning_rate: float = 0.01
    iterations: int = 200
    optimizer: str = "adam"
    batch_size: Optional[int] = None
    seed: int = 0
    kappa_grid: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    rho_lower: float = -np.inf
    rho_upper: float = np.inf
    validation_fraction: float = 0.5
    ridge_lambda: Optional[float] = None
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        if self.optimizer not in ("adam", "plain"):
            raise ConfigurationError("optimizer must be 'adam' or 'plain'")
        grid = tuple(float(k) for k in self.kappa_grid)
        if not grid:
            raise ConfigurationError("kappa_grid must be non-empty")
        if any(not 0.0 <= k <= 1.0 for k in grid):
            raise ConfigurationError("kappa values must lie in [0, 1]")
        if list(grid) != sorted(grid):
            raise ConfigurationError("kappa_grid must be sorted ascending")
        if self.rho_lower > self.rho_upper:
            raise ConfigurationError("rho_lower must be <= rho_upper")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigurationError("validation_fraction must be in (0, 1)")
        object.__setattr__(self, "kappa_grid", grid)


@dataclass(eq=False)
class TrainResult:
    policy: SoftmaxFeaturePolicy
    objective_trace: np.ndarray
    true_value_trace: Optional[np.ndarray] = None


class CachedQModel:
    """Memoizes full-table predictions for one fixed context matrix."""

    def __init__(self, model: QModel, data: LoggedDataset):
        self.model = model
        self._contexts_id = id(data.contexts)
        self._q_all = model.predict_all(data.contexts)

    def predict_all(self, contexts: np.ndarray) -> np.ndarray:
        if id(contexts) == self._contexts_id:
            return self._q_all
        return self.model.predict_all(contexts)


def _prepare_estimator(spec: EstimatorSpec, data: LoggedDataset, cfg: TrainConfig,
                       gamma_source, qhat: Optional[QModel]):
    """Fit/build whatever the chosen estimator needs, then return a closure
    grad(policy, data_subset, projection_subset) -> GradientEstimate.

    Model predictions and the gamma projection do not depend on theta, so
    they are computed once here and reused across iterations.
    """
    needs_q = spec.name in ("dr", "pona")
    needs_projection = spec.name in ("pi", "lcpi", "pona")
    mode = MARGINAL if spec.name == "pi" else LOCAL

    if needs_q and qhat is None:
        qhat = fit_qmodel(data, ACTION_FEATURE, ridge_lambda=cfg.ridge_lambda)
    cached = CachedQModel(qhat, data) if needs_q else None
    projection = None
    if needs_projection:
        if gamma_source is None:
            raise ConfigurationError(
                f"estimator {spec.name!r} needs a gamma_source (environment or projection)"
            )
        if isinstance(gamma_source, GammaProjection):
            projection = gamma_source
        else:
            projection = GammaProjection.build(data, gamma_source, mode)

    def gradient(policy, subset, projection_subset) -> GradientEstimate:
        q_model = cached if subset is data else qhat
        if spec.name == "ips":
            return grad_ips(policy, subset)
        if spec.name == "dr":
            return grad_dr(policy, subset, q_model)
        if spec.name in ("pi", "lcpi"):
            return grad_pseudoinverse(policy, subset, mode, projection_subset)
        return grad_pona(policy, subset, q_model, spec.kappa, projection_subset)

    return gradient, projection


def train(spec: EstimatorSpec, data: LoggedDataset, cfg: TrainConfig,
          gamma_source=None, qhat: Optional[QModel] = None,
          eval_fn=None, policy_kind: str = "feature") -> TrainResult:
    """Full- or mini-batch gradient ascent from theta = 0.

    ``policy_kind`` selects the parameterization: "feature" (logits linear
    in the action indicator, shared across actions) or "per_action" (one
    logit head per action id, the conventional baseline class).

    Returns the final policy and the per-iteration trace of the estimated
    objective (evaluated at the start of each iteration, on the iteration's
    batch). ``eval_fn(policy) -> float``, when given, is recorded alongside.
    Deterministic given (data, cfg).
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    if policy_kind not in ("feature", "per_action"):
        raise ConfigurationError("policy_kind must be 'feature' or 'per_action'")
    gradient, projection = _prepare_estimator(spec, data, cfg, gamma_source, qhat)
    policy_cls = SoftmaxFeaturePolicy if policy_kind == "feature" else PerActionSoftmaxPolicy
    policy = policy_cls.zeros(data.dim_context, data.space)
    rng = np.random.default_rng(cfg.seed)

    moment1 = np.zeros_like(policy.theta)
    moment2 = np.zeros_like(policy.theta)
    trace = np.empty(cfg.iterations)
    true_trace = np.empty(cfg.iterations) if eval_fn is not None else None

    for t in range(cfg.iterations):
        if cfg.batch_size is not None and cfg.batch_size < len(data):
            idx = rng.choice(len(data), size=cfg.batch_size, replace=False)
            batch = data.subset(idx)
            batch_projection = projection.subset(idx) if projection is not None else None
        else:
            batch, batch_projection = data, projection

        try:
            estimate = gradient(policy, batch, batch_projection)
        except NumericError as exc:
            raise NumericError(
                f"estimator {spec.name!r} aborted at iteration {t}: {exc}"
            ) from exc
        if not np.isfinite(estimate.grad).all():
            raise NumericError(
                f"estimator {spec.name!r} produced a non-finite gradient at iteration {t}"
            )
        trace[t] = estimate.value_estimate
        if true_trace is not None:
            true_trace[t] = eval_fn(policy)

        grad = estimate.grad
        if cfg.optimizer == "adam":
            moment1 = cfg.beta1 * moment1 + (1 - cfg.beta1) * grad
            moment2 = cfg.beta2 * moment2 + (1 - cfg.beta2) * grad ** 2
            m_hat = moment1 / (1 - cfg.beta1 ** (t + 1))
            v_hat = moment2 / (1 - cfg.beta2 ** (t + 1))
            step = cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        else:
            step = cfg.learning_rate * grad
        policy = policy_cls(theta=policy.theta + step, space=data.space)

    return TrainResult(policy=policy, objective_trace=trace, true_value_trace=true_trace)


def ope_value(policy, validation: LoggedDataset, method: str,
              qhat: Optional[QModel] = None) -> float:
    """Off-policy value estimate of a policy on held-out logged data.

    IPS: mean of w_i r_i. DR: mean of w_i (r_i - qhat) plus the model value
    over existing actions. When no q-model is passed for DR, one is fit on
    the validation split itself.
    """
    if method not in ("ips", "dr"):
        raise ConfigurationError("ope method must be 'ips' or 'dr'")
    probs = policy.action_probs(validation.contexts)
    if (validation.propensities <= 0).any():
        raise ValueError("validation propensities must be positive")
    weights = probs[np.arange(len(validation)), validation.actions] / validation.propensities
    if method == "ips":
        return float(np.mean(weights * validation.rewards))
    if qhat is None:
        qhat = fit_qmodel(validation, ACTION_FEATURE)
    q_all = qhat.predict_all(validation.contexts)
    existing_mask = validation.partition.existing_mask
    q_existing = np.where(existing_mask[None, :], q_all, 0.0)
    q_factual = q_all[np.arange(len(validation)), validation.actions]
    model_value = (probs * q_existing).sum(axis=1)
    return float(np.mean(weights * (validation.rewards - q_factual) + model_value))


@dataclass(eq=False)
class KappaReport:
    kappa: float
    new_action_mass: float
    ope_value: float
    feasible: bool


@dataclass(eq=False)
class KappaTuneResult:
    kappa: float
    policy: SoftmaxFeaturePolicy
    feasible: bool
    report: list


def tune_kappa(data: LoggedDataset, cfg: TrainConfig, partition: ActionPartition,
               gamma_source) -> KappaTuneResult:
    """Constrained grid search over kappa.

    The data is split once; every kappa trains from scratch on the train
    split. Candidates whose validation new-action mass lies in
    [rho_lower, rho_upper] compete on DR-estimated value; if none is
    feasible the closest-mass kappa is returned with ``feasible=False``.
    """
    train_split, val_split = data.split(cfg.validation_fraction, cfg.seed)
    qhat = fit_qmodel(train_split, ACTION_FEATURE, ridge_lambda=cfg.ridge_lambda)
    projection = GammaProjection.build(train_split, gamma_source, LOCAL)

    report = []
    policies = []
    for kappa in cfg.kappa_grid:
        result = train(
            EstimatorSpec("pona", kappa=kappa), train_split, cfg,
            gamma_source=projection, qhat=qhat,
        )
        mass = result.policy.new_action_mass(partition, val_split.contexts)
        value = ope_value(result.policy, val_split, "dr", qhat=qhat)
        feasible = bool(cfg.rho_lower <= mass <= cfg.rho_upper)
        report.append(KappaReport(kappa=kappa, new_action_mass=mass,
                                  ope_value=value, feasible=feasible))
        policies.append(result.policy)

    feasible_idx = [i for i, r in enumerate(report) if r.feasible]
    if feasible_idx:
        best = max(feasible_idx, key=lambda i: (report[i].ope_value, -report[i].kappa))
        return KappaTuneResult(
            kappa=report[best].kappa, policy=policies[best], feasible=True, report=report
        )
    # no feasible kappa: surface the infeasibility, return the closest-mass one
    def distance(r: KappaReport) -> float:
        return max(cfg.rho_lower - r.new_action_mass, 0.0) + max(
            r.new_action_mass - cfg.rho_upper, 0.0
        )

    best = min(range(len(report)), key=lambda i: (distance(report[i]), report[i].kappa))
    return KappaTuneResult(
        kappa=report[best].kappa, policy=policies[best], feasible=False, report=report
    )


def write_trace_csv(result: TrainResult, path) -> None:
    """Export the training trace as CSV rows of
    (iteration, estimated_objective[, true_value])."""
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        header = ["iteration", "estimated_objective"]
        if result.true_value_trace is not None:
            header.append("true_value")
        writer.writerow(header)
        for t, est in enumerate(result.objective_trace):
            row = [t, f"{est:.17g}"]
            if result.true_value_trace is not None:
                row.append(f"{result.true_value_trace[t]:.17g}")
            writer.writerow(row)
