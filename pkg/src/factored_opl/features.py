"""Factored action spaces and their binary indicator encodings.

Actions are tuples of discrete features. Two indicator layouts are used
throughout the package:

- ``"marginal"``: one one-hot block per feature dimension, concatenated
  (length ``sum(cards)``).
- ``"local"``: the marginal blocks followed by a one-hot block over the
  joint value of the first ``s`` dimensions (length
  ``sum(cards) + prod(cards[:s])``), which lets the encoding carry
  interaction effects among those dimensions.
"""
from dataclasses import dataclass, field
from itertools import product
from math import prod

import numpy as np

from .errors import CapacityError

# indicator layout tags
MARGINAL = "marginal"
LOCAL = "local"

_MODES = (MARGINAL, LOCAL)

DEFAULT_ENUMERATION_CAP = 10**6


def _check_mode(mode: str) -> None:
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")


@dataclass(frozen=True)
class FeatureScheme:
    """Shape of a factored action space.

    Parameters
    ----------
    cards: tuple of int
        Number of possible values per feature dimension (each >= 2).

    s: int
        Interaction width: the first ``s`` dimensions form the local
        interaction block, ``1 <= s <= len(cards)``.
    """

    cards: tuple
    s: int

    def __post_init__(self):
        object.__setattr__(self, "cards", tuple(int(m) for m in self.cards))
        if len(self.cards) < 1:
            raise ValueError("need at least one feature dimension")
        if any(m < 2 for m in self.cards):
            raise ValueError(f"every cardinality must be >= 2, got {self.cards}")
        if not 1 <= self.s <= len(self.cards):
            raise ValueError(f"s must be in [1, {len(self.cards)}], got {self.s}")

    @property
    def dims(self) -> int:
        return len(self.cards)

    @property
    def n_actions(self) -> int:
        return prod(self.cards)

    @property
    def marginal_len(self) -> int:
        return sum(self.cards)

    @property
    def interaction_len(self) -> int:
        return prod(self.cards[: self.s])

    def indicator_len(self, mode: str) -> int:
        _check_mode(mode)
        if mode == MARGINAL:
            return self.marginal_len
        return self.marginal_len + self.interaction_len

    def marginal_offsets(self) -> np.ndarray:
        """Start index of each dimension's one-hot block."""
        return np.concatenate([[0], np.cumsum(self.cards[:-1])]).astype(np.int64)

    def interaction_index(self, values) -> int:
        """Mixed-radix (row-major, dimension 0 most significant) index of the first-s values."""
        idx = 0
        for l in range(self.s):
            idx = idx * self.cards[l] + int(values[l])
        return idx


def validate_features(values, scheme: FeatureScheme) -> tuple:
    values = tuple(int(v) for v in values)
    if len(values) != scheme.dims:
        raise ValueError(f"expected {scheme.dims} feature values, got {len(values)}")
    for l, v in enumerate(values):
        if not 0 <= v < scheme.cards[l]:
            raise ValueError(
                f"feature index {v} out of range [0, {scheme.cards[l]}) in dimension {l}"
            )
    return values


def encode(values, scheme: FeatureScheme, mode: str = LOCAL) -> np.ndarray:
    """Encode one feature tuple as a binary indicator vector."""
    _check_mode(mode)
    values = validate_features(values, scheme)
    bits = np.zeros(scheme.indicator_len(mode), dtype=np.float64)
    offsets = scheme.marginal_offsets()
    for l, v in enumerate(values):
        bits[offsets[l] + v] = 1.0
    if mode == LOCAL:
        bits[scheme.marginal_len + scheme.interaction_index(values)] = 1.0
    return bits


def enumerate_actions(scheme: FeatureScheme, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """All feature tuples in lexicographic order, shape (n_actions, dims)."""
    if scheme.n_actions > cap:
        raise CapacityError(
            f"action space size {scheme.n_actions} exceeds cap {cap}"
        )
    return np.array(list(product(*(range(m) for m in scheme.cards))), dtype=np.int64)


def indicator_table(features: np.ndarray, scheme: FeatureScheme, mode: str) -> np.ndarray:
    """Stack indicator rows for a matrix of feature tuples, shape (n, indicator_len)."""
    _check_mode(mode)
    features = np.asarray(features, dtype=np.int64)
    n = features.shape[0]
    table = np.zeros((n, scheme.indicator_len(mode)), dtype=np.float64)
    offsets = scheme.marginal_offsets()
    rows = np.arange(n)
    for l in range(scheme.dims):
        table[rows, offsets[l] + features[:, l]] = 1.0
    if mode == LOCAL:
        inter = np.zeros(n, dtype=np.int64)
        for l in range(scheme.s):
            inter = inter * scheme.cards[l] + features[:, l]
        table[rows, scheme.marginal_len + inter] = 1.0
    return table


@dataclass(frozen=True, eq=False)
class ActionSpace:
    """A concrete set of actions with their features and cached indicator tables.

    For synthetic environments this is the full enumeration of the scheme;
    for real-data environments it is the observed item set (action ids are
    row indices into ``features``).
    """

    scheme: FeatureScheme
    features: np.ndarray
    _tables: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[1] != self.scheme.dims:
            raise ValueError(f"features must have shape (n, {self.scheme.dims})")
        for l in range(self.scheme.dims):
            bad = (feats[:, l] < 0) | (feats[:, l] >= self.scheme.cards[l])
            if bad.any():
                raise ValueError(f"feature index out of range in dimension {l}")
        object.__setattr__(self, "features", feats)

    @classmethod
    def full(cls, scheme: FeatureScheme, cap: int = DEFAULT_ENUMERATION_CAP) -> "ActionSpace":
        return cls(scheme=scheme, features=enumerate_actions(scheme, cap=cap))

    @property
    def n_actions(self) -> int:
        return self.features.shape[0]

    def indicators(self, mode: str) -> np.ndarray:
        """(n_actions, indicator_len) table, built once per mode and cached."""
        if mode not in self._tables:
            self._tables[mode] = indicator_table(self.features, self.scheme, mode)
        return self._tables[mode]

    def interaction_indices(self) -> np.ndarray:
        """Mixed-radix index of the first-s feature values, per action."""
        idx = np.zeros(self.n_actions, dtype=np.int64)
        for l in range(self.scheme.s):
            idx = idx * self.scheme.cards[l] + self.features[:, l]
        return idx


@dataclass(frozen=True, eq=False)
class ActionPartition:
    """Disjoint split of action ids into existing (logged) and new (never logged)."""

    existing: np.ndarray
    new: np.ndarray
    n_actions: int

    def __post_init__(self):
        existing = np.unique(np.asarray(self.existing, dtype=np.int64))
        new = np.unique(np.asarray(self.new, dtype=np.int64))
        if np.intersect1d(existing, new).size:
            raise ValueError("existing and new action sets overlap")
        union = np.union1d(existing, new)
        if union.size != self.n_actions or (union != np.arange(self.n_actions)).any():
            raise ValueError("existing and new must partition all action ids")
        object.__setattr__(self, "existing", existing)
        object.__setattr__(self, "new", new)

    @property
    def existing_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_actions, dtype=bool)
        mask[self.existing] = True
        return mask

    @property
    def new_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_actions, dtype=bool)
        mask[self.new] = True
        return mask
