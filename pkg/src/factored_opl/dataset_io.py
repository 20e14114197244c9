"""Serialization of logged datasets and the real-interaction data path:
a loader for (users, items, rewards) CSV files with a dense reward matrix,
and the semi-synthetic environment built on top of it.

File schemas (UTF-8, comma-separated, header row required):

- ``users.csv``:   user_id, x_0, ..., x_{dim-1}
- ``items.csv``:   item_id, f_0, ..., f_{d-1}   (integer feature indices)
- ``rewards.csv``: user_id, item_id, reward     (one row per pair, all pairs)
- ``logged.csv``:  context_0..k, action_id, reward, propensity
"""
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .data import LoggedDataset
from .errors import ConfigurationError, ParseError
from .features import ActionPartition, ActionSpace, FeatureScheme
from .synthetic import SoftmaxLoggingEnv

FLOAT_FMT = "{:.17g}"


# ---------------------------------------------------------------------------
# logged-data round trip
# ---------------------------------------------------------------------------

def write_logged_csv(data: LoggedDataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [f"context_{i}" for i in range(data.dim_context)]
            + ["action_id", "reward", "propensity"]
        )
        for i in range(len(data)):
            writer.writerow(
                [FLOAT_FMT.format(v) for v in data.contexts[i]]
                + [
                    str(int(data.actions[i])),
                    FLOAT_FMT.format(data.rewards[i]),
                    FLOAT_FMT.format(data.propensities[i]),
                ]
            )


def read_logged_csv(path, space: Optional[ActionSpace] = None,
                    partition: Optional[ActionPartition] = None) -> LoggedDataset:
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "missing header row") from None
        tail = ["action_id", "reward", "propensity"]
        if len(header) < 4 or header[-3:] != tail:
            raise ParseError(path, 1, f"header must end with {tail}")
        dim = len(header) - 3
        expected = [f"context_{i}" for i in range(dim)]
        if header[:dim] != expected:
            raise ParseError(path, 1, f"context columns must be {expected}")

        contexts, actions, rewards, propensities = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != dim + 3:
                raise ParseError(path, lineno, f"expected {dim + 3} fields, got {len(row)}")
            try:
                contexts.append([float(v) for v in row[:dim]])
                actions.append(int(row[dim]))
                rewards.append(float(row[dim + 1]))
                propensities.append(float(row[dim + 2]))
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None

    return LoggedDataset(
        contexts=np.array(contexts, dtype=np.float64).reshape(len(actions), dim),
        actions=np.array(actions, dtype=np.int64),
        rewards=np.array(rewards, dtype=np.float64),
        propensities=np.array(propensities, dtype=np.float64),
        space=space,
        partition=partition,
    )


# ---------------------------------------------------------------------------
# real-interaction data
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class RealDatasetSpec:
    """A fully observed (user x item) reward matrix with item features.

    Rewards are clipped at ``clip_quantile`` and rescaled by the clip value
    so they lie in [0, 1]. User feature vectors are assumed pre-reduced.
    """

    user_ids: list
    user_features: np.ndarray  # (n_users, dim_context)
    item_ids: list
    item_features: np.ndarray  # (n_items, dims)
    rewards: np.ndarray  # (n_users, n_items), post clip-and-rescale
    scheme: FeatureScheme
    clip_quantile: float
    clip_value: float


def _read_table(path, kind: str, id_column: str) -> tuple:
    """Parse a headered CSV into (ids, rows of floats); located errors."""
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "missing header row") from None
        if len(header) < 2:
            raise ParseError(path, 1, f"{kind} file needs an id column plus data columns")
        if header[0] != id_column:
            raise ParseError(path, 1, f"first column must be {id_column!r}, got {header[0]!r}")
        ids, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(path, lineno, f"expected {len(header)} fields, got {len(row)}")
            ids.append(row[0])
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
        if not rows:
            raise ParseError(path, 2, f"{kind} file has no data rows")
    return ids, np.array(rows, dtype=np.float64)


def load_real(users_path, items_path, rewards_path, s: int,
              clip_quantile: float = 0.99,
              cards: Optional[tuple] = None) -> RealDatasetSpec:
    """Load and validate the three-file schema described in the module docstring."""
    if not 0.0 < clip_quantile <= 1.0:
        raise ConfigurationError("clip_quantile must be in (0, 1]")
    user_ids, user_features = _read_table(users_path, "users", "user_id")
    item_ids, item_values = _read_table(items_path, "items", "item_id")

    item_features = item_values.astype(np.int64)
    if (item_features != item_values).any():
        bad = int(np.argwhere(item_features != item_values)[0][0])
        raise ParseError(items_path, bad + 2, "item features must be integers")
    if (item_features < 0).any():
        bad = int(np.argwhere((item_features < 0).any(axis=1))[0][0])
        raise ParseError(items_path, bad + 2, "item feature index is negative")
    inferred = tuple(int(m) for m in item_features.max(axis=0) + 1)
    if cards is not None:
        cards = tuple(int(m) for m in cards)
        if len(cards) != item_features.shape[1]:
            raise ConfigurationError(
                f"cards has {len(cards)} entries but items carry "
                f"{item_features.shape[1]} features"
            )
        over = item_features >= np.array(cards)[None, :]
        if over.any():
            bad = int(np.argwhere(over.any(axis=1))[0][0])
            raise ParseError(
                items_path, bad + 2,
                "item feature index exceeds the declared cardinality",
            )
    else:
        cards = inferred
    if any(m < 2 for m in cards):
        raise ConfigurationError(
            f"every feature dimension needs at least two observed values, got {cards}"
        )
    scheme = FeatureScheme(cards=cards, s=s)

    user_index = {uid: i for i, uid in enumerate(user_ids)}
    item_index = {iid: i for i, iid in enumerate(item_ids)}
    if len(user_index) != len(user_ids):
        raise ParseError(users_path, 1, "duplicate user ids")
    if len(item_index) != len(item_ids):
        raise ParseError(items_path, 1, "duplicate item ids")

    rewards = np.full((len(user_ids), len(item_ids)), np.nan)
    rewards_path = Path(rewards_path)
    with rewards_path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(rewards_path, 1, "missing header row") from None
        if header != ["user_id", "item_id", "reward"]:
            raise ParseError(rewards_path, 1, "header must be user_id,item_id,reward")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ParseError(rewards_path, lineno, f"expected 3 fields, got {len(row)}")
            if row[0] not in user_index:
                raise ParseError(rewards_path, lineno, f"unknown user id {row[0]!r}")
            if row[1] not in item_index:
                raise ParseError(rewards_path, lineno, f"unknown item id {row[1]!r}")
            u, a = user_index[row[0]], item_index[row[1]]
            if not np.isnan(rewards[u, a]):
                raise ParseError(rewards_path, lineno, "duplicate (user, item) pair")
            try:
                rewards[u, a] = float(row[2])
            except ValueError as exc:
                raise ParseError(rewards_path, lineno, str(exc)) from None
    missing = int(np.isnan(rewards).sum())
    if missing:
        raise ParseError(
            rewards_path, 1,
            f"reward matrix must be fully observed; {missing} pairs are missing",
        )

    clip_value = float(np.quantile(rewards, clip_quantile))
    if clip_value <= 0:
        raise ConfigurationError("clip value is non-positive; rewards cannot be rescaled")
    rewards = np.minimum(rewards, clip_value) / clip_value

    return RealDatasetSpec(
        user_ids=user_ids,
        user_features=user_features,
        item_ids=item_ids,
        item_features=item_features,
        rewards=rewards,
        scheme=scheme,
        clip_quantile=clip_quantile,
        clip_value=clip_value,
    )


# ---------------------------------------------------------------------------
# semi-synthetic environment
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class SemiSyntheticEnv(SoftmaxLoggingEnv):
    """Environment whose ground truth is a fully observed reward matrix.

    Contexts are user feature vectors sampled uniformly with replacement;
    q(x, a) is read from the matrix row of the sampled user, so evaluation
    is exact with no model fitting.
    """

    spec: RealDatasetSpec
    space: ActionSpace
    partition: ActionPartition
    beta: float
    coverage: dict = field(default_factory=dict)
    _row_of: dict = field(init=False, repr=False)

    def __post_init__(self):
        self._row_of = {}
        for i, row in enumerate(self.spec.user_features):
            self._row_of.setdefault(row.tobytes(), i)

    @property
    def dim_context(self) -> int:
        return self.spec.user_features.shape[1]

    def sample_contexts(self, n: int, rng: np.random.Generator) -> np.ndarray:
        picks = rng.integers(0, self.spec.user_features.shape[0], size=n)
        return self.spec.user_features[picks]

    def q_matrix(self, contexts: np.ndarray) -> np.ndarray:
        contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
        rows = []
        for row in contexts:
            key = row.tobytes()
            if key not in self._row_of:
                raise ValueError("context does not correspond to a user of this dataset")
            rows.append(self._row_of[key])
        return self.spec.rewards[rows]

    def _sample_rewards(self, q_factual: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        # rewards are fully observed; the matrix entry is the reward
        return q_factual


def build_semi_synth_env(spec: RealDatasetSpec, beta: float = 0.05,
                         new_action_fraction: float = 0.0,
                         seed: int = 0) -> SemiSyntheticEnv:
    """Partition items into existing/new, greedily covering every observed
    first-s feature combination (then any uncovered marginal values of the
    remaining dimensions) before filling the rest at random."""
    space = ActionSpace(scheme=spec.scheme, features=spec.item_features)
    n = space.n_actions
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    inter = space.interaction_indices()
    observed_combos = np.unique(inter)
    target = int(round((1.0 - new_action_fraction) * n))
    if target < observed_combos.size:
        raise ConfigurationError(
            f"existing set of size {target} cannot cover the {observed_combos.size} "
            f"observed feature combinations; the achievable minimum fraction of new "
            f"actions is {1.0 - observed_combos.size / n:.4f}"
        )

    chosen = []
    chosen_mask = np.zeros(n, dtype=bool)
    for combo in observed_combos:
        candidates = np.nonzero(inter == combo)[0]
        pick = int(rng.choice(candidates))
        chosen.append(pick)
        chosen_mask[pick] = True

    # second pass: cover marginal values of dimensions beyond s when capacity allows
    scheme = spec.scheme
    for l in range(scheme.s, scheme.dims):
        for value in range(scheme.cards[l]):
            if len(chosen) >= target:
                break
            covered = (space.features[chosen_mask, l] == value).any()
            if covered:
                continue
            candidates = np.nonzero((space.features[:, l] == value) & ~chosen_mask)[0]
            if candidates.size:
                pick = int(rng.choice(candidates))
                chosen.append(pick)
                chosen_mask[pick] = True

    remaining = np.nonzero(~chosen_mask)[0]
    n_fill = target - len(chosen)
    if n_fill > 0:
        fill = rng.choice(remaining, size=n_fill, replace=False)
        chosen_mask[fill] = True
    existing = np.nonzero(chosen_mask)[0]
    new = np.nonzero(~chosen_mask)[0]
    partition = ActionPartition(existing=existing, new=new, n_actions=n)

    covered_combos = np.unique(inter[existing])
    marginal_cov = []
    for l in range(scheme.dims):
        values = np.unique(space.features[:, l])
        covered = np.unique(space.features[existing, l])
        marginal_cov.append(covered.size / values.size)
    coverage = {
        "prefix_combination_coverage": covered_combos.size / observed_combos.size,
        "marginal_value_coverage": min(marginal_cov),
    }
    return SemiSyntheticEnv(
        spec=spec, space=space, partition=partition, beta=beta, coverage=coverage
    )


# ---------------------------------------------------------------------------
# miniature fixture
# ---------------------------------------------------------------------------

def generate_fixture(out_dir, n_users: int = 20, cards: tuple = (5, 6),
                     dim_context: int = 4, seed: int = 7) -> dict:
    """Write a miniature real-data fixture (all feature combinations as
    items, watch-ratio-like skewed positive rewards) and return its paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    users = rng.standard_normal((n_users, dim_context))
    scheme = FeatureScheme(cards=cards, s=1)
    space = ActionSpace.full(scheme)
    n_items = space.n_actions

    # skewed positive rewards from a latent bilinear score, like watch ratios
    item_loadings = rng.standard_normal((dim_context, n_items)) * 0.5
    popularity = rng.uniform(-0.5, 0.5, size=n_items)
    latent = users @ item_loadings + popularity[None, :]
    rewards = np.exp(0.4 * latent)

    users_path = out_dir / "users.csv"
    with users_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["user_id"] + [f"x_{i}" for i in range(dim_context)])
        for i, row in enumerate(users):
            writer.writerow([f"u{i}"] + [FLOAT_FMT.format(v) for v in row])

    items_path = out_dir / "items.csv"
    with items_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["item_id"] + [f"f_{l}" for l in range(scheme.dims)])
        for j, feats in enumerate(space.features):
            writer.writerow([f"v{j}"] + [str(int(f)) for f in feats])

    rewards_path = out_dir / "rewards.csv"
    with rewards_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["user_id", "item_id", "reward"])
        for i in range(n_users):
            for j in range(n_items):
                writer.writerow([f"u{i}", f"v{j}", FLOAT_FMT.format(rewards[i, j])])

    return {"users": users_path, "items": items_path, "rewards": rewards_path}
