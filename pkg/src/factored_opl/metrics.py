"""Ground-truth evaluation of policies against an environment oracle.

All metrics are Monte-Carlo over fresh contexts with exact inner sums over
the action set, and each value metric also comes normalized by the uniform
random policy evaluated on the same contexts.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

MASS_EPS = 1e-12


@dataclass(frozen=True)
class MetricsReport:
    """Per-policy evaluation results.

    ``value_per_new`` (and its normalized variant) is None for policies that
    place no mass on new actions; serializers must keep that distinct from 0.
    """

    overall_value: float
    value_per_existing: Optional[float]
    value_per_new: Optional[float]
    new_action_mass: float
    norm_overall: float
    norm_existing: Optional[float]
    norm_new: Optional[float]
    n_contexts: int


def evaluate(policy, env, n_eval_contexts: int = 10_000, seed: int = 0) -> MetricsReport:
    """Evaluate a policy-like object (anything with ``action_probs``) on
    fresh contexts drawn from the environment."""
    if n_eval_contexts < 1:
        raise ValueError("n_eval_contexts must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    contexts = env.sample_contexts(n_eval_contexts, rng)
    q = env.q_matrix(contexts)
    probs = policy.action_probs(contexts)

    existing = env.partition.existing_mask
    new = env.partition.new_mask

    overall = float((probs * q).sum(axis=1).mean())
    mass_existing = float(probs[:, existing].sum(axis=1).mean())
    mass_new = float(probs[:, new].sum(axis=1).mean()) if new.any() else 0.0
    value_existing_num = float((probs[:, existing] * q[:, existing]).sum(axis=1).mean())
    value_new_num = (
        float((probs[:, new] * q[:, new]).sum(axis=1).mean()) if new.any() else 0.0
    )

    per_existing = value_existing_num / mass_existing if mass_existing > MASS_EPS else None
    per_new = value_new_num / mass_new if mass_new > MASS_EPS else None

    # the uniform baseline on the same contexts
    n_actions = q.shape[1]
    uniform_overall = float(q.mean(axis=1).mean())
    uniform_existing = float(q[:, existing].mean(axis=1).mean())
    uniform_new = float(q[:, new].mean(axis=1).mean()) if new.any() else None

    norm_overall = overall / uniform_overall
    norm_existing = per_existing / uniform_existing if per_existing is not None else None
    norm_new = (
        per_new / uniform_new if (per_new is not None and uniform_new is not None) else None
    )

    return MetricsReport(
        overall_value=overall,
        value_per_existing=per_existing,
        value_per_new=per_new,
        new_action_mass=mass_new,
        norm_overall=norm_overall,
        norm_existing=norm_existing,
        norm_new=norm_new,
        n_contexts=n_eval_contexts,
    )
