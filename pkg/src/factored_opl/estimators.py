"""Policy-gradient estimators over logged bandit data.

Five estimators are provided:

- ``grad_ips``: importance-weighted score-function estimator.
- ``grad_dr``: doubly robust; importance-weighted residuals plus a model
  term whose action sum runs over existing actions only.
- ``grad_pseudoinverse`` in ``"marginal"`` mode: projects logged rewards
  onto per-dimension feature indicators through the pseudoinverse of the
  logging second-moment matrix (unbiased when rewards carry no feature
  interactions).
- ``grad_pseudoinverse`` in ``"local"`` mode: same machinery on the
  indicator extended with the first-s interaction block, which tolerates
  interaction effects among those dimensions. Its outer action sum runs
  over the whole action set, which is what routes gradient signal to
  never-logged actions.
- ``grad_pona``: a convex combination of the local-mode projection
  estimator and DR, trading new-action learning against existing-action
  optimality.

All estimators are linear in the rewards and accept optional per-row
weights, so their exact expectation under a known logging distribution can
be computed by enumerating (context, action) pairs.
"""
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .data import LoggedDataset
from .errors import EstimatorPreconditionError, NumericError
from .features import LOCAL, ActionSpace
from .linalg import pinv_symmetric_stack

PROB_SUM_TOL = 1e-9


@dataclass(eq=False)
class GradientEstimate:
    """A gradient shaped like theta, plus per-call diagnostics."""

    grad: np.ndarray
    estimator: str
    value_estimate: float
    max_importance_weight: float
    effective_sample_size: float


def _row_weights(data: LoggedDataset, row_weights: Optional[np.ndarray]) -> np.ndarray:
    if row_weights is None:
        return np.full(len(data), 1.0 / len(data))
    row_weights = np.asarray(row_weights, dtype=np.float64)
    if row_weights.shape != (len(data),):
        raise ValueError("row_weights must have one entry per row")
    return row_weights


def _importance_weights(policy, data: LoggedDataset,
                        probs: np.ndarray) -> np.ndarray:
    if (data.propensities <= 0).any():
        raise EstimatorPreconditionError("logged propensities must be positive")
    return probs[np.arange(len(data)), data.actions] / data.propensities


def _diagnostics(weights: np.ndarray) -> tuple:
    total = weights.sum()
    denom = (weights ** 2).sum()
    ess = float(total ** 2 / denom) if denom > 0 else 0.0
    return float(weights.max()), ess


def _check_finite(grad: np.ndarray, name: str) -> np.ndarray:
    if not np.isfinite(grad).all():
        raise NumericError(f"{name} produced a non-finite gradient")
    return grad


# A policy whose indicator_table is None uses the identity indicator (one
# coordinate per action id); the helpers below keep the estimator algebra
# shared between the feature and per-action parameterizations.

def _mean_indicator(probs: np.ndarray, table) -> np.ndarray:
    return probs if table is None else probs @ table


def _project_rows(matrix: np.ndarray, table) -> np.ndarray:
    return matrix if table is None else matrix @ table


def _logged_term(contexts: np.ndarray, coeff: np.ndarray, actions: np.ndarray,
                 table, n_actions: int) -> np.ndarray:
    """sum_i coeff_i x_i (indicator of a_i)' without materializing one-hots."""
    if table is None:
        out = np.zeros((n_actions, contexts.shape[1]))
        np.add.at(out, actions, contexts * coeff[:, None])
        return out.T
    return contexts.T @ (coeff[:, None] * table[actions])


def logging_prob_table(data: LoggedDataset, logging: Union[np.ndarray, object]) -> np.ndarray:
    """Per-row logging probabilities over all actions, from an environment
    oracle or a precomputed (n, n_actions) table."""
    if isinstance(logging, np.ndarray):
        table = np.asarray(logging, dtype=np.float64)
    else:
        table = logging.logging_probs_matrix(data.contexts)
    if table.shape != (len(data), data.space.n_actions):
        raise ValueError(
            f"logging table must have shape ({len(data)}, {data.space.n_actions})"
        )
    sums = table.sum(axis=1)
    if np.abs(sums - 1.0).max() > PROB_SUM_TOL:
        raise ValueError("logging probabilities do not sum to 1 per row")
    return table


def gamma_matrix(x: np.ndarray, logging, space: ActionSpace, mode: str = LOCAL) -> np.ndarray:
    """Exact second moment of the action indicator under the logging policy
    at one context: sum_a pi0(a|x) I_a I_a'. Symmetric PSD; rank-deficient
    exactly when some indicator coordinate carries no logging mass."""
    if isinstance(logging, np.ndarray) and logging.ndim == 1:
        probs = np.asarray(logging, dtype=np.float64)
        if abs(probs.sum() - 1.0) > PROB_SUM_TOL:
            raise ValueError("logging probabilities do not sum to 1")
    else:
        probs = logging.logging_probs(np.asarray(x, dtype=np.float64))
    table = space.indicators(mode)
    return (table * probs[:, None]).T @ table


def value_vector(x: np.ndarray, logging, q_row: np.ndarray,
                 space: ActionSpace, mode: str = LOCAL) -> np.ndarray:
    """Expected (indicator * reward) under the logging policy at one context;
    the quantity whose pseudoinverse projection recovers q on supported actions."""
    if isinstance(logging, np.ndarray) and logging.ndim == 1:
        probs = np.asarray(logging, dtype=np.float64)
    else:
        probs = logging.logging_probs(np.asarray(x, dtype=np.float64))
    q_row = np.asarray(q_row, dtype=np.float64)
    return space.indicators(mode).T @ (probs * q_row)


@dataclass(eq=False)
class GammaProjection:
    """Per-row cache of ``T pinv(Gamma_i) I_{a_i}``, the projected indicator
    weights every pseudoinverse-estimator call reuses.

    ``projected[i, a]`` is the weight action ``a`` receives from row ``i``;
    multiplied by the logged reward it acts as that row's synthetic reward
    for action ``a``.
    """

    mode: str
    projected: np.ndarray  # (n, n_actions)

    @classmethod
    def build(cls, data: LoggedDataset, logging, mode: str,
              chunk: int = 512) -> "GammaProjection":
        table = data.space.indicators(mode)  # (n_actions, dim)
        probs = logging_prob_table(data, logging)
        n = len(data)
        dim = table.shape[1]
        projected = np.empty((n, data.space.n_actions))
        logged_rows = table[data.actions]  # (n, dim)
        for start in range(0, n, chunk):
            stop = min(start + chunk, n)
            weighted = probs[start:stop, :, None] * table[None, :, :]  # (c, nA, dim)
            gammas = np.swapaxes(weighted, 1, 2) @ table  # (c, dim, dim)
            gamma_pinv = pinv_symmetric_stack(gammas)
            projected_dim = np.einsum("cde,ce->cd", gamma_pinv, logged_rows[start:stop])
            projected[start:stop] = projected_dim @ table.T
        return cls(mode=mode, projected=projected)

    def subset(self, indices: np.ndarray) -> "GammaProjection":
        return GammaProjection(mode=self.mode, projected=self.projected[indices])


def resolve_gamma_source(data: LoggedDataset, gamma_source, mode: str) -> GammaProjection:
    if isinstance(gamma_source, GammaProjection):
        if gamma_source.mode != mode:
            raise ValueError(
                f"gamma projection was built in {gamma_source.mode!r} mode, need {mode!r}"
            )
        if gamma_source.projected.shape[0] != len(data):
            raise ValueError("gamma projection row count does not match the dataset")
        return gamma_source
    if gamma_source is None:
        raise ValueError("pseudoinverse estimators need a gamma_source (env or projection)")
    return GammaProjection.build(data, gamma_source, mode)


def grad_ips(policy, data: LoggedDataset,
             row_weights: Optional[np.ndarray] = None,
             clip_weight: Optional[float] = None) -> GradientEstimate:
    """Importance-weighted policy gradient: mean of w_i r_i dlogpi(a_i|x_i).

    ``clip_weight`` caps the importance weights (diagnostics only; off by
    default and in every acceptance run). The max-weight diagnostic always
    reports the unclipped maximum.
    """
    omega = _row_weights(data, row_weights)
    probs = policy.action_probs(data.contexts)
    weights = _importance_weights(policy, data, probs)
    applied = weights if clip_weight is None else np.minimum(weights, clip_weight)
    table = policy.indicator_table
    mean_ind = _mean_indicator(probs, table)
    coeff = omega * applied * data.rewards
    grad = _logged_term(data.contexts, coeff, data.actions, table, probs.shape[1]) \
        - data.contexts.T @ (coeff[:, None] * mean_ind)
    max_w, ess = _diagnostics(weights)
    return GradientEstimate(
        grad=_check_finite(grad, "ips"),
        estimator="ips",
        value_estimate=float(coeff.sum()),
        max_importance_weight=max_w,
        effective_sample_size=ess,
    )


def grad_dr(policy, data: LoggedDataset, qhat,
            row_weights: Optional[np.ndarray] = None,
            clip_weight: Optional[float] = None) -> GradientEstimate:
    """Doubly robust policy gradient.

    The correction term importance-weights the model residuals; the model
    term sums pi_theta * qhat * dlogpi over existing actions only, since the
    model is extrapolated (or undefined) on new actions. ``clip_weight``
    behaves as in ``grad_ips``.
    """
    if data.partition is None:
        raise EstimatorPreconditionError("doubly robust estimation needs the action partition")
    omega = _row_weights(data, row_weights)
    probs = policy.action_probs(data.contexts)
    weights = _importance_weights(policy, data, probs)
    applied = weights if clip_weight is None else np.minimum(weights, clip_weight)
    table = policy.indicator_table
    mean_ind = _mean_indicator(probs, table)

    q_all = qhat.predict_all(data.contexts)
    existing_mask = data.partition.existing_mask
    q_existing = np.where(existing_mask[None, :], q_all, 0.0)
    q_factual = q_all[np.arange(len(data)), data.actions]

    coeff = omega * applied * (data.rewards - q_factual)
    correction = _logged_term(data.contexts, coeff, data.actions, table, probs.shape[1]) \
        - data.contexts.T @ (coeff[:, None] * mean_ind)

    weighted_q = probs * q_existing  # (n, n_actions), zero on new columns
    row_value = weighted_q.sum(axis=1)
    model = data.contexts.T @ (
        omega[:, None] * (_project_rows(weighted_q, table) - row_value[:, None] * mean_ind)
    )
    value = float((omega * (applied * (data.rewards - q_factual) + row_value)).sum())
    max_w, ess = _diagnostics(weights)
    return GradientEstimate(
        grad=_check_finite(correction + model, "dr"),
        estimator="dr",
        value_estimate=value,
        max_importance_weight=max_w,
        effective_sample_size=ess,
    )


def grad_pseudoinverse(policy, data: LoggedDataset,
                       mode: str, gamma_source,
                       row_weights: Optional[np.ndarray] = None,
                       tag: Optional[str] = None) -> GradientEstimate:
    """Projection estimator: each logged reward is distributed over all
    actions through the pseudoinverse of the logging indicator second moment,
    then fed through the exact policy-gradient form over the full action set."""
    projection = resolve_gamma_source(data, gamma_source, mode)
    omega = _row_weights(data, row_weights)
    probs = policy.action_probs(data.contexts)
    weights = _importance_weights(policy, data, probs)
    table = policy.indicator_table
    mean_ind = _mean_indicator(probs, table)

    synthetic = probs * projection.projected  # (n, n_actions)
    row_value = synthetic.sum(axis=1)
    coeff = omega * data.rewards
    grad = data.contexts.T @ (
        coeff[:, None] * _project_rows(synthetic, table)
        - (coeff * row_value)[:, None] * mean_ind
    )
    max_w, ess = _diagnostics(weights)
    name = tag or ("lcpi" if mode == LOCAL else "pi")
    return GradientEstimate(
        grad=_check_finite(grad, name),
        estimator=name,
        value_estimate=float((coeff * row_value).sum()),
        max_importance_weight=max_w,
        effective_sample_size=ess,
    )


def grad_pona(policy, data: LoggedDataset, qhat,
              kappa: float, gamma_source,
              row_weights: Optional[np.ndarray] = None) -> GradientEstimate:
    """kappa-weighted sum of the local projection estimator and DR.

    kappa=0 and kappa=1 return the underlying estimate arrays unchanged
    (bitwise), not a rescaled copy.
    """
    if not 0.0 <= kappa <= 1.0:
        raise ValueError(f"kappa must be in [0, 1], got {kappa}")
    if kappa == 0.0:
        part = grad_dr(policy, data, qhat, row_weights)
        return GradientEstimate(
            grad=part.grad,
            estimator="pona",
            value_estimate=part.value_estimate,
            max_importance_weight=part.max_importance_weight,
            effective_sample_size=part.effective_sample_size,
        )
    if kappa == 1.0:
        part = grad_pseudoinverse(policy, data, LOCAL, gamma_source, row_weights)
        return GradientEstimate(
            grad=part.grad,
            estimator="pona",
            value_estimate=part.value_estimate,
            max_importance_weight=part.max_importance_weight,
            effective_sample_size=part.effective_sample_size,
        )
    local = grad_pseudoinverse(policy, data, LOCAL, gamma_source, row_weights)
    robust = grad_dr(policy, data, qhat, row_weights)
    return GradientEstimate(
        grad=kappa * local.grad + (1.0 - kappa) * robust.grad,
        estimator="pona",
        value_estimate=kappa * local.value_estimate + (1.0 - kappa) * robust.value_estimate,
        max_importance_weight=robust.max_importance_weight,
        effective_sample_size=robust.effective_sample_size,
    )
