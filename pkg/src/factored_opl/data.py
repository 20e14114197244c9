"""Logged bandit data container."""
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .features import ActionPartition, ActionSpace


@dataclass(eq=False)
class LoggedDataset:
    """Rows of (context, action, reward) with logging propensities.

    Parameters
    ----------
    contexts: array of shape (n, dim_context)

    actions: int array of shape (n,)
        Ids into the action space; every logged action is an existing one.

    rewards: array of shape (n,)

    propensities: array of shape (n,)
        Logging probability of the logged action, recorded at generation
        time; strictly positive by definition.

    marginal_propensities: array of shape (n, dims), optional
        Logging marginals of each feature value of the logged action.

    prefix_propensities: array of shape (n,), optional
        Logging probability of the logged action's first-s feature combination.
    """

    contexts: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    propensities: np.ndarray
    space: Optional[ActionSpace] = None
    partition: Optional[ActionPartition] = None
    marginal_propensities: Optional[np.ndarray] = None
    prefix_propensities: Optional[np.ndarray] = None

    def __post_init__(self):
        self.contexts = np.asarray(self.contexts, dtype=np.float64)
        self.actions = np.asarray(self.actions, dtype=np.int64)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        self.propensities = np.asarray(self.propensities, dtype=np.float64)
        n = len(self)
        if self.contexts.ndim != 2:
            raise ValueError("contexts must be a (n, dim_context) matrix")
        for name in ("actions", "rewards", "propensities"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have shape ({n},)")
        if n and (self.propensities <= 0).any():
            raise ValueError("logged propensities must be strictly positive")
        if self.space is not None and n:
            if ((self.actions < 0) | (self.actions >= self.space.n_actions)).any():
                raise ValueError("logged action id out of range")
        if self.partition is not None and n:
            if not self.partition.existing_mask[self.actions].all():
                raise ValueError("logged actions must belong to the existing set")

    def __len__(self) -> int:
        return self.contexts.shape[0]

    @property
    def dim_context(self) -> int:
        return self.contexts.shape[1]

    def subset(self, indices: np.ndarray) -> "LoggedDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return replace(
            self,
            contexts=self.contexts[indices],
            actions=self.actions[indices],
            rewards=self.rewards[indices],
            propensities=self.propensities[indices],
            marginal_propensities=None
            if self.marginal_propensities is None
            else self.marginal_propensities[indices],
            prefix_propensities=None
            if self.prefix_propensities is None
            else self.prefix_propensities[indices],
        )

    def split(self, validation_fraction: float, seed: int) -> tuple:
        """Shuffle rows and split into (train, validation)."""
        if not 0.0 < validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(self))
        n_val = int(round(len(self) * validation_fraction))
        n_val = min(max(n_val, 1), len(self) - 1)
        return self.subset(order[:-n_val]), self.subset(order[-n_val:])
