"""Synthetic ground-truth environment: three-term linear q-function,
construction of the existing/new action partition, softmax logging policy,
and logged-data generation.

The q-function is

    q(x, a) = offset + sum_l x'M_l[:, f_l(a)] + x'M_loc[:, f_{1:s}(a)]
              + gamma * x'M_full[:, a]

so with ``gamma = 0`` it is exactly linear in the local-mode action
indicator, and ``gamma`` dials in a violation of that structure. The
constant offset keeps rewards centered away from zero so that values
normalized by the uniform policy are well defined; it is absorbed by the
marginal indicator blocks and does not perturb the linear structure.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import LoggedDataset
from .errors import CapacityError, ConfigurationError
from .features import LOCAL, MARGINAL, ActionPartition, ActionSpace, FeatureScheme

DEFAULT_LOG_CAP = 10**7


@dataclass(frozen=True)
class SynthConfig:
    """Knobs of the synthetic environment.

    Parameters
    ----------
    scheme: FeatureScheme
        Shape of the factored action space.

    context_dim: int, default=5
        Dimension of the standard-normal context vectors.

    gamma: float, default=0.0
        Weight of the full-interaction reward term; 0 keeps the q-function
        exactly indicator-linear.

    beta: float, default=0.05
        Softmax inverse temperature of the logging policy.

    noise_sigma: float, default=1.0
        Standard deviation of additive Gaussian reward noise.

    new_action_fraction: float, default=0.0
        Target |new| / |all|; the existing set always keeps the diagonal and
        local-combination base sets, so feasibility depends on the scheme.

    random_fraction: float, optional
        Size of the random component of the existing set as a fraction of
        |all|. Derived from ``new_action_fraction`` when omitted; when given
        it must agree with the derived value.

    q_offset: float, default=3.0
        Constant added to every reward.

    full_term_range: float, default=0.5
        Half-range of the uniform distribution for the full-interaction
        parameter matrix (the marginal/local matrices use half-range 1).
    """

    scheme: FeatureScheme
    context_dim: int = 5
    gamma: float = 0.0
    beta: float = 0.05
    noise_sigma: float = 1.0
    new_action_fraction: float = 0.0
    random_fraction: Optional[float] = None
    seed: int = 0
    q_offset: float = 3.0
    full_term_range: float = 0.5

    def __post_init__(self):
        if self.context_dim < 1:
            raise ConfigurationError("context_dim must be >= 1")
        if self.gamma < 0:
            raise ConfigurationError("gamma must be >= 0")
        if self.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be >= 0")
        if not 0.0 <= self.new_action_fraction < 1.0:
            raise ConfigurationError("new_action_fraction must be in [0, 1)")


@dataclass(frozen=True, eq=False)
class RewardModel:
    """Parameter matrices of the three q-function terms."""

    marginal: list  # d matrices of shape (context_dim, m_l)
    local: np.ndarray  # (context_dim, prod(cards[:s]))
    full: np.ndarray  # (context_dim, n_actions)

    @classmethod
    def sample(cls, scheme: FeatureScheme, context_dim: int, rng: np.random.Generator,
               full_term_range: float = 0.5) -> "RewardModel":
        marginal = [rng.uniform(-1.0, 1.0, size=(context_dim, m)) for m in scheme.cards]
        local = rng.uniform(-1.0, 1.0, size=(context_dim, scheme.interaction_len))
        full = rng.uniform(-full_term_range, full_term_range,
                           size=(context_dim, scheme.n_actions))
        return cls(marginal=marginal, local=local, full=full)


def base_existing_sets(space: ActionSpace) -> tuple:
    """The two deterministic base sets of the existing-action construction.

    The diagonal set cycles one shared index through every dimension, which
    covers every value of every feature; the local-combination set contains
    every first-s-dimension combination padded with index 0, which covers
    every interaction-block coordinate.
    """
    scheme = space.scheme
    feats = space.features
    id_of = {tuple(row): i for i, row in enumerate(feats.tolist())}

    diagonal = []
    for i in range(max(scheme.cards)):
        key = tuple(i % m for m in scheme.cards)
        if key in id_of:
            diagonal.append(id_of[key])
    lcs = []
    inter = space.interaction_indices()
    for combo in range(scheme.interaction_len):
        # padded representative: first-s values of this combo, zeros elsewhere
        values = []
        rem = combo
        for m in reversed(scheme.cards[: scheme.s]):
            values.append(rem % m)
            rem //= m
        key = tuple(reversed(values)) + (0,) * (scheme.dims - scheme.s)
        if key in id_of:
            lcs.append(id_of[key])
        else:
            # sparse action set (real data): fall back to any action with this combo
            candidates = np.nonzero(inter == combo)[0]
            if candidates.size:
                lcs.append(int(candidates[0]))
    return np.array(sorted(set(diagonal)), dtype=np.int64), np.array(sorted(set(lcs)), dtype=np.int64)


def build_partition(space: ActionSpace, new_action_fraction: float,
                    rng: np.random.Generator,
                    random_fraction: Optional[float] = None) -> ActionPartition:
    """Existing = diagonal set + local-combination set + uniform random fill."""
    n = space.n_actions
    diagonal, lcs = base_existing_sets(space)
    base = np.union1d(diagonal, lcs)
    target = int(round((1.0 - new_action_fraction) * n))
    if target < base.size:
        raise ConfigurationError(
            f"new_action_fraction={new_action_fraction} requests "
            f"{target} existing actions but the base sets already need {base.size}"
        )
    if new_action_fraction > 0 and target >= n:
        raise ConfigurationError(
            f"new_action_fraction={new_action_fraction} rounds to zero new actions "
            f"on an action space of size {n}"
        )
    n_random = target - base.size
    if random_fraction is not None:
        expected = int(round(random_fraction * n))
        if expected != n_random:
            raise ConfigurationError(
                f"random_fraction={random_fraction} implies {expected} random "
                f"existing actions, but new_action_fraction implies {n_random}"
            )
    pool = np.setdiff1d(np.arange(n), base)
    fill = rng.choice(pool, size=n_random, replace=False) if n_random else np.array([], dtype=np.int64)
    existing = np.union1d(base, fill.astype(np.int64))
    new = np.setdiff1d(np.arange(n), existing)
    return ActionPartition(existing=existing, new=new, n_actions=n)


class SoftmaxLoggingEnv:
    """Shared behavior of environments whose logging policy is a softmax of
    the true q-function over existing actions (and exactly zero on new ones)."""

    space: ActionSpace
    partition: ActionPartition
    beta: float

    # subclasses provide q_matrix / sample_contexts / reward noise
    def q_matrix(self, contexts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample_contexts(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def _sample_rewards(self, q_factual: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    @property
    def dim_context(self) -> int:
        raise NotImplementedError

    def q_true(self, x: np.ndarray, action: int) -> float:
        return float(self.q_matrix(np.asarray(x, dtype=np.float64)[None])[0, int(action)])

    def logging_probs_matrix(self, contexts: np.ndarray) -> np.ndarray:
        """(n, n_actions) logging probabilities; rows sum to 1 exactly."""
        q = self.q_matrix(contexts)
        existing = self.partition.existing
        logits = self.beta * q[:, existing]
        logits -= logits.max(axis=1, keepdims=True)
        weights = np.exp(logits)
        weights /= weights.sum(axis=1, keepdims=True)
        probs = np.zeros_like(q)
        probs[:, existing] = weights
        return probs

    def logging_probs(self, x: np.ndarray) -> np.ndarray:
        return self.logging_probs_matrix(np.asarray(x, dtype=np.float64)[None])[0]

    def generate_log(self, n: int, seed: int, cap: int = DEFAULT_LOG_CAP) -> LoggedDataset:
        """Draw contexts, actions from the logging policy, and noisy rewards.

        Each row records the exact logging propensity of the drawn action
        together with its per-dimension and first-s-combination logging
        marginals.
        """
        if n < 1:
            raise ValueError("n must be >= 1")
        if n > cap:
            raise CapacityError(f"requested {n} rows, cap is {cap}")
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        contexts = self.sample_contexts(n, rng)
        probs = self.logging_probs_matrix(contexts)
        q = self.q_matrix(contexts)

        existing = self.partition.existing
        cum = np.cumsum(probs[:, existing], axis=1)
        cum /= cum[:, -1:]
        draws = rng.random(n)
        picks = np.minimum((cum < draws[:, None]).sum(axis=1), existing.size - 1)
        actions = existing[picks]
        rows = np.arange(n)

        rewards = self._sample_rewards(q[rows, actions], rng)
        propensities = probs[rows, actions]

        scheme = self.space.scheme
        feats = self.space.features
        offsets = scheme.marginal_offsets()
        marg_table = self.space.indicators(MARGINAL)
        marginal_probs = probs @ marg_table  # (n, marginal_len)
        marginal_propensities = np.column_stack([
            marginal_probs[rows, offsets[l] + feats[actions, l]]
            for l in range(scheme.dims)
        ])
        inter_table = self.space.indicators(LOCAL)[:, scheme.marginal_len:]
        prefix_probs = probs @ inter_table  # (n, interaction_len)
        prefix_propensities = prefix_probs[rows, self.space.interaction_indices()[actions]]

        return LoggedDataset(
            contexts=contexts,
            actions=actions,
            rewards=rewards,
            propensities=propensities,
            space=self.space,
            partition=self.partition,
            marginal_propensities=marginal_propensities,
            prefix_propensities=prefix_propensities,
        )


@dataclass(eq=False)
class EnvOracle(SoftmaxLoggingEnv):
    """Fully specified synthetic environment usable both for data generation
    and for exact evaluation of any policy."""

    config: SynthConfig
    space: ActionSpace
    partition: ActionPartition
    reward_model: RewardModel
    _inter_ids: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._inter_ids = self.space.interaction_indices()

    @property
    def beta(self) -> float:
        return self.config.beta

    @property
    def dim_context(self) -> int:
        return self.config.context_dim

    def sample_contexts(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal((n, self.config.context_dim))

    def q_matrix(self, contexts: np.ndarray) -> np.ndarray:
        contexts = np.asarray(contexts, dtype=np.float64)
        feats = self.space.features
        q = np.full((contexts.shape[0], self.space.n_actions), self.config.q_offset,
                    dtype=np.float64)
        for l, m_l in enumerate(self.reward_model.marginal):
            q += (contexts @ m_l)[:, feats[:, l]]
        q += (contexts @ self.reward_model.local)[:, self._inter_ids]
        if self.config.gamma != 0.0:
            q += self.config.gamma * (contexts @ self.reward_model.full)
        return q

    def _sample_rewards(self, q_factual: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        noise = rng.standard_normal(q_factual.shape[0])
        return q_factual + self.config.noise_sigma * noise


def build_env(config: SynthConfig) -> EnvOracle:
    """Construct the action space, partition, and reward model from a config;
    deterministic given ``config.seed``."""
    space = ActionSpace.full(config.scheme)
    seq = np.random.SeedSequence(config.seed)
    partition_seed, model_seed = seq.spawn(2)
    partition = build_partition(
        space,
        config.new_action_fraction,
        np.random.default_rng(partition_seed),
        random_fraction=config.random_fraction,
    )
    reward_model = RewardModel.sample(
        config.scheme,
        config.context_dim,
        np.random.default_rng(model_seed),
        full_term_range=config.full_term_range,
    )
    return EnvOracle(config=config, space=space, partition=partition, reward_model=reward_model)
