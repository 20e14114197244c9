"""Shared fixtures and the exact-expectation oracle helpers.

The oracle device: every gradient estimator is linear in the rewards and
averages i.i.d. rows, so its exact expectation under a known logging
policy is obtained by enumerating (context, existing action) pairs,
weighting each row by p(x) * pi0(a|x), and substituting the noiseless
reward. The reference policy gradient is computed by direct summation over
the full action set with plain loops, independent of the vectorized
estimator path.
"""
import numpy as np
import pytest

import factored_opl as fo


def true_policy_gradient(policy, env, contexts: np.ndarray) -> np.ndarray:
    """Direct summation of E_x[sum_a pi(a|x) q(x,a) dlog pi(a|x)] over all actions."""
    total = np.zeros_like(policy.theta)
    n = contexts.shape[0]
    for x in contexts:
        q = env.q_matrix(x[None])[0]
        probs = policy.action_probs(x[None])[0]
        for a in range(env.space.n_actions):
            total += probs[a] * q[a] * policy.grad_log_prob(x, a) / n
    return total


def exact_expectation_rows(env, contexts: np.ndarray):
    """Enumerate the replicate distribution: one weighted row per
    (context, existing action) pair with noiseless rewards."""
    rows_x, rows_a, rows_r, rows_p, weights = [], [], [], [], []
    n = contexts.shape[0]
    for x in contexts:
        q = env.q_matrix(x[None])[0]
        p0 = env.logging_probs(x)
        for a in env.partition.existing:
            rows_x.append(x)
            rows_a.append(a)
            rows_r.append(q[a])
            rows_p.append(p0[a])
            weights.append(p0[a] / n)
    data = fo.LoggedDataset(
        contexts=np.array(rows_x),
        actions=np.array(rows_a),
        rewards=np.array(rows_r),
        propensities=np.array(rows_p),
        space=env.space,
        partition=env.partition,
    )
    return data, np.array(weights)


@pytest.fixture(scope="session")
def small_scheme():
    return fo.FeatureScheme(cards=(2, 2, 2), s=2)


@pytest.fixture(scope="session")
def small_env(small_scheme):
    """d=3, cards=(2,2,2), s=2, gamma=0, three actions missing; the base-set
    construction keeps local-combination support intact."""
    cfg = fo.SynthConfig(
        scheme=small_scheme, context_dim=3, gamma=0.0, noise_sigma=0.0,
        new_action_fraction=0.375, seed=11,
    )
    return fo.build_env(cfg)


@pytest.fixture(scope="session")
def full_support_env(small_scheme):
    cfg = fo.SynthConfig(
        scheme=small_scheme, context_dim=3, gamma=0.0, noise_sigma=0.0,
        new_action_fraction=0.0, seed=12,
    )
    return fo.build_env(cfg)


@pytest.fixture(scope="session")
def oracle_contexts():
    return np.random.default_rng(99).standard_normal((8, 3))


@pytest.fixture()
def random_policy(small_env):
    rng = np.random.default_rng(7)
    theta = rng.normal(scale=0.5, size=(3, small_env.space.scheme.indicator_len(fo.LOCAL)))
    return fo.SoftmaxFeaturePolicy(theta=theta, space=small_env.space)
