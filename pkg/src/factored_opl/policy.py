"""Learnable softmax policy with feature-linear logits.

Logits are ``x' theta I_a`` where ``I_a`` is the local-mode action
indicator, so every action (including never-logged ones) receives its
logit through shared feature weights. There is deliberately no per-action
bias term: one would make new-action logits unlearnable from logged data.
"""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NumericError
from .features import LOCAL, ActionPartition, ActionSpace


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction; rows sum to 1 exactly."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=1, keepdims=True)


@dataclass(eq=False)
class SoftmaxFeaturePolicy:
    """Stochastic policy pi(a|x) = softmax_a(x' theta I_a) over all actions."""

    theta: np.ndarray
    space: ActionSpace
    _table: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._table = self.space.indicators(LOCAL)
        self.theta = np.asarray(self.theta, dtype=np.float64)
        expected = (None, self._table.shape[1])
        if self.theta.ndim != 2 or self.theta.shape[1] != expected[1]:
            raise ValueError(
                f"theta must have shape (dim_context, {expected[1]}), got {self.theta.shape}"
            )
        if not np.isfinite(self.theta).all():
            raise ValueError("theta contains non-finite entries")

    @classmethod
    def zeros(cls, dim_context: int, space: ActionSpace) -> "SoftmaxFeaturePolicy":
        dim = space.scheme.indicator_len(LOCAL)
        return cls(theta=np.zeros((dim_context, dim)), space=space)

    @property
    def indicator_table(self) -> np.ndarray:
        return self._table

    def logits(self, contexts: np.ndarray) -> np.ndarray:
        contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
        out = (contexts @ self.theta) @ self._table.T
        if not np.isfinite(out).all():
            raise NumericError("policy logits are non-finite")
        return out

    def action_probs(self, contexts: np.ndarray) -> np.ndarray:
        """(n, n_actions) probabilities; strictly positive, rows sum to 1."""
        return softmax_rows(self.logits(contexts))

    def grad_log_prob(self, x: np.ndarray, action: int) -> np.ndarray:
        """Exact score function d/dtheta log pi(a|x), shaped like theta."""
        x = np.asarray(x, dtype=np.float64)
        probs = self.action_probs(x[None])[0]
        mean_indicator = probs @ self._table
        return np.outer(x, self._table[int(action)] - mean_indicator)

    def new_action_mass(self, partition: ActionPartition, contexts: np.ndarray) -> float:
        """Mean probability mass placed on new actions over the given contexts."""
        contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
        if contexts.shape[0] == 0:
            raise ValueError("need at least one context")
        probs = self.action_probs(contexts)
        return float(probs[:, partition.new].sum(axis=1).mean()) if partition.new.size else 0.0

    def copy(self) -> "SoftmaxFeaturePolicy":
        return SoftmaxFeaturePolicy(theta=self.theta.copy(), space=self.space)


@dataclass(eq=False)
class PerActionSoftmaxPolicy:
    """Baseline policy with one context-linear logit per action id.

    This is the conventional parameterization for off-policy learners that
    do not use action features: logits are ``X @ theta`` with theta of shape
    (dim_context, n_actions). Never-logged actions receive only the negative
    mean-term gradient, so mass on them decays toward zero during training;
    it is the parameterization that cannot learn to select new actions.

    ``indicator_table`` is None to signal the identity indicator to the
    estimators (each action is its own coordinate).
    """

    theta: np.ndarray
    space: ActionSpace
    indicator_table = None

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.ndim != 2 or self.theta.shape[1] != self.space.n_actions:
            raise ValueError(
                f"theta must have shape (dim_context, {self.space.n_actions}), "
                f"got {self.theta.shape}"
            )
        if not np.isfinite(self.theta).all():
            raise ValueError("theta contains non-finite entries")

    @classmethod
    def zeros(cls, dim_context: int, space: ActionSpace) -> "PerActionSoftmaxPolicy":
        return cls(theta=np.zeros((dim_context, space.n_actions)), space=space)

    def logits(self, contexts: np.ndarray) -> np.ndarray:
        contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
        out = contexts @ self.theta
        if not np.isfinite(out).all():
            raise NumericError("policy logits are non-finite")
        return out

    def action_probs(self, contexts: np.ndarray) -> np.ndarray:
        return softmax_rows(self.logits(contexts))

    def grad_log_prob(self, x: np.ndarray, action: int) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        probs = self.action_probs(x[None])[0]
        onehot = np.zeros(self.space.n_actions)
        onehot[int(action)] = 1.0
        return np.outer(x, onehot - probs)

    def new_action_mass(self, partition: ActionPartition, contexts: np.ndarray) -> float:
        contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
        if contexts.shape[0] == 0:
            raise ValueError("need at least one context")
        probs = self.action_probs(contexts)
        return float(probs[:, partition.new].sum(axis=1).mean()) if partition.new.size else 0.0


@dataclass(eq=False)
class ArgmaxPolicy:
    """Deterministic wrapper putting all mass on the base policy's argmax action."""

    base: object

    def action_probs(self, contexts: np.ndarray) -> np.ndarray:
        probs = self.base.action_probs(contexts)
        out = np.zeros_like(probs)
        out[np.arange(probs.shape[0]), probs.argmax(axis=1)] = 1.0
        return out


class UniformPolicy:
    """Uniform probabilities over the whole action set; the normalization baseline."""

    def __init__(self, n_actions: int):
        self.n_actions = n_actions

    def action_probs(self, contexts: np.ndarray) -> np.ndarray:
        contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
        return np.full((contexts.shape[0], self.n_actions), 1.0 / self.n_actions)


class LoggingPolicy:
    """Read-only view of an environment's logging policy."""

    def __init__(self, env):
        self.env = env

    def action_probs(self, contexts: np.ndarray) -> np.ndarray:
        return self.env.logging_probs_matrix(np.atleast_2d(np.asarray(contexts, dtype=np.float64)))


def save_policy(policy: SoftmaxFeaturePolicy, path) -> None:
    """Checkpoint theta (shape header included) to a .npz file."""
    np.savez(Path(path), theta=policy.theta)


def load_policy(path, space: ActionSpace) -> SoftmaxFeaturePolicy:
    with np.load(Path(path)) as data:
        return SoftmaxFeaturePolicy(theta=data["theta"], space=space)
