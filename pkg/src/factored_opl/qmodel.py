"""Reward-regression models and their softmax conversion to policies.

Two designs are supported:

- ``"action_id"``: one linear head (weights + intercept) per existing
  action. Cannot say anything about actions it never saw, which is exactly
  why policies built from it never select new actions.
- ``"action_feature"``: a bilinear model on (context x local-mode action
  indicator), which extrapolates to new actions through shared features.

Both are fit by closed-form ridge regression so results are exactly
reproducible.
"""
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import LoggedDataset
from .errors import UnsupportedActionError
from .features import LOCAL, ActionPartition, ActionSpace
from .policy import softmax_rows

ACTION_ID = "action_id"
ACTION_FEATURE = "action_feature"
_KINDS = (ACTION_ID, ACTION_FEATURE)


def default_ridge_lambda(n: int) -> float:
    return 1e-3 * n


@dataclass(eq=False)
class QModel:
    """Closed-form ridge regression of rewards on a (context, action) design.

    ``weights`` has shape (dim_context, width) and ``intercept`` shape
    (width,), where width is the number of existing actions (action_id) or
    the indicator length (action_feature).
    """

    kind: str
    weights: np.ndarray
    intercept: np.ndarray
    space: ActionSpace
    support: np.ndarray  # action ids the model can score
    ridge_lambda: float
    _column_of: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}")
        self._column_of = {int(a): i for i, a in enumerate(self.support)}

    def predict(self, x: np.ndarray, action: int) -> float:
        x = np.asarray(x, dtype=np.float64)
        action = int(action)
        if self.kind == ACTION_ID:
            if action not in self._column_of:
                raise UnsupportedActionError(
                    f"action {action} is outside the model's existing-action support"
                )
            col = self._column_of[action]
            return float(x @ self.weights[:, col] + self.intercept[col])
        phi = self.space.indicators(LOCAL)[action]
        return float((x @ self.weights + self.intercept) @ phi)

    def predict_support_matrix(self, contexts: np.ndarray) -> np.ndarray:
        """(n, |support|) predictions over the model's supported actions."""
        contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
        head = contexts @ self.weights + self.intercept  # (n, width)
        if self.kind == ACTION_ID:
            return head
        return head @ self.space.indicators(LOCAL)[self.support].T

    def predict_all(self, contexts: np.ndarray) -> np.ndarray:
        """(n, n_actions) predictions; only valid for the action_feature kind."""
        if self.kind == ACTION_ID:
            raise UnsupportedActionError(
                "action_id models cannot score the full action set"
            )
        contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
        return (contexts @ self.weights + self.intercept) @ self.space.indicators(LOCAL).T

    def to_policy(self, temperature: float = 1.0,
                  partition: Optional[ActionPartition] = None,
                  argmax: bool = False) -> "QModelPolicy":
        if temperature <= 0:
            raise ValueError("temperature must be > 0")
        if partition is not None and self.kind == ACTION_ID:
            if not np.array_equal(np.sort(self.support), partition.existing):
                raise ValueError("model support does not match the partition's existing set")
        return QModelPolicy(model=self, temperature=temperature, argmax=argmax)


@dataclass(eq=False)
class QModelPolicy:
    """Softmax (or argmax) of model predictions over the supported action set;
    exactly zero mass outside it."""

    model: QModel
    temperature: float = 1.0
    argmax: bool = False

    def action_probs(self, contexts: np.ndarray) -> np.ndarray:
        contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
        scores = self.model.predict_support_matrix(contexts)
        if self.argmax:
            probs = np.zeros_like(scores)
            probs[np.arange(scores.shape[0]), scores.argmax(axis=1)] = 1.0
        else:
            probs = softmax_rows(scores / self.temperature)
        out = np.zeros((contexts.shape[0], self.model.space.n_actions))
        out[:, self.model.support] = probs
        return out

    def new_action_mass(self, partition: ActionPartition, contexts: np.ndarray) -> float:
        probs = self.action_probs(contexts)
        return float(probs[:, partition.new].sum(axis=1).mean()) if partition.new.size else 0.0


def _augment(contexts: np.ndarray) -> np.ndarray:
    return np.column_stack([contexts, np.ones(contexts.shape[0])])


def _ridge_solve(gram: np.ndarray, moment: np.ndarray, lam: float) -> np.ndarray:
    if lam > 0:
        return np.linalg.solve(gram + lam * np.eye(gram.shape[0]), moment)
    solution, _, rank, _ = np.linalg.lstsq(gram, moment, rcond=None)
    if rank < gram.shape[0]:
        warnings.warn(
            "singular normal equations with lambda=0; using pseudoinverse solution",
            RuntimeWarning,
            stacklevel=3,
        )
    return solution


def fit_qmodel(data: LoggedDataset, kind: str = ACTION_FEATURE,
               ridge_lambda: Optional[float] = None) -> QModel:
    """Least-squares fit of rewards on the chosen design, ridge-regularized.

    The intercept column is part of the penalized design; with the default
    lambda of 1e-3 * n this is immaterial, and it keeps the solution a pure
    linear solve.
    """
    if len(data) == 0:
        raise ValueError("cannot fit on an empty dataset")
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}")
    lam = default_ridge_lambda(len(data)) if ridge_lambda is None else float(ridge_lambda)
    if lam < 0:
        raise ValueError("ridge_lambda must be >= 0")
    aug = _augment(data.contexts)  # (n, d+1)
    d_aug = aug.shape[1]

    if kind == ACTION_ID:
        if data.partition is not None:
            support = data.partition.existing
        else:
            support = np.unique(data.actions)
        w_aug = np.zeros((d_aug, support.size))
        for col, action in enumerate(support):
            rows = data.actions == action
            if not rows.any():
                continue  # ridge with no data keeps the zero solution
            x_a = aug[rows]
            gram = x_a.T @ x_a
            moment = x_a.T @ data.rewards[rows]
            w_aug[:, col] = _ridge_solve(gram, moment, lam)
    else:
        support = np.arange(data.space.n_actions)
        phi = data.space.indicators(LOCAL)[data.actions]  # (n, width)
        width = phi.shape[1]
        design = (aug[:, :, None] * phi[:, None, :]).reshape(len(data), d_aug * width)
        gram = design.T @ design
        moment = design.T @ data.rewards
        w_aug = _ridge_solve(gram, moment, lam).reshape(d_aug, width)

    return QModel(
        kind=kind,
        weights=w_aug[:-1],
        intercept=w_aug[-1],
        space=data.space,
        support=np.asarray(support, dtype=np.int64),
        ridge_lambda=lam,
    )
