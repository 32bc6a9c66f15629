"""Policy iteration with a Riemannian policy-evaluation step.

Each iteration collects fresh on-policy data, fits the GMM-QF to the Bellman
residual by warm-started Armijo descent, and acts greedily on the result.
The policy is never stored separately: it is the argmin of Q under the
current parameters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .bellman import loss
from .envs import build_dataset, collect
from .gmm import greedy_indices
from .manifold import GmmParams
from .optim import ArmijoConfig, optimize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RolloutConfig:
    episodes: int = 20
    horizon: int = 70
    epsilon: float = 0.1

    def __post_init__(self):
        if self.episodes < 1 or self.horizon < 1:
            raise ValueError("episodes and horizon must be positive")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")


@dataclass(frozen=True)
class InitConfig:
    """Initial point: zero weights, uniform means, isotropic covariances."""

    cov_scale: float = 0.25
    mean_low: float = -1.0
    mean_high: float = 1.0

    def __post_init__(self):
        if not self.cov_scale > 0:
            raise ValueError("cov_scale must be positive")
        if not self.mean_low < self.mean_high:
            raise ValueError("mean_low must be below mean_high")


@dataclass(frozen=True)
class GreedyPolicy:
    """Acts by ``argmin_a Q(embed(s, a))``; ties go to the first action."""

    params: GmmParams
    env: object

    def __call__(self, states):
        idx, _ = greedy_indices(self.params, states, self.env.actions, self.env.embed)
        return np.asarray(self.env.actions, dtype=float)[idx]


@dataclass(frozen=True)
class ValidationResult:
    total_loss: float
    steps_to_goal: int | None
    success: bool
    states: np.ndarray


@dataclass(frozen=True)
class IterationRecord:
    n: int
    total_loss: float
    inner_loss_start: float
    inner_loss: float
    steps_to_goal: int | None
    success: bool


def initial_params(dim, n_components, rng, init=InitConfig()):
    means = rng.uniform(init.mean_low, init.mean_high, size=(n_components, dim))
    covs = np.broadcast_to(init.cov_scale * np.eye(dim), (n_components, dim, dim))
    return GmmParams(np.zeros(n_components), means, covs)


def policy_evaluation(prev, data, alpha, cfg, trace=None):
    """Fit the parameters to ``data`` starting from ``prev``."""
    return optimize(prev, data, alpha, cfg, trace)


def policy_improvement(params, s, env):
    """Greedy action at a single state."""
    return float(GreedyPolicy(params, env)(np.atleast_2d(s))[0])


def validation_rollout(env, params, horizon=1000, start=None):
    """Exploration-free episode from a fixed start state.

    Accumulates the one-step loss until the goal is entered (environments
    that stop at the goal) or for the full horizon otherwise.
    """
    policy = GreedyPolicy(params, env)
    s = env.validation_start if start is None else np.asarray(start, dtype=float)
    states = [s]
    total = 0.0
    steps_to_goal = None
    for t in range(horizon):
        if steps_to_goal is None and env.is_goal(s):
            steps_to_goal = t
            if env.stop_at_goal:
                break
        a = policy(s[None, :])[0]
        total += float(env.loss(s, a))
        s = env.step(s, a)
        states.append(s)
    else:
        if steps_to_goal is None and env.is_goal(s):
            steps_to_goal = horizon
    states = np.asarray(states)
    return ValidationResult(total, steps_to_goal, env.success(states), states)


def run_policy_iteration(
    env,
    n_iters,
    n_components,
    alpha=0.9,
    armijo=ArmijoConfig(),
    rollout=RolloutConfig(),
    init=InitConfig(),
    seed=0,
    validation_horizon=1000,
):
    """Alternate data collection, policy evaluation and greedy improvement.

    Record ``n`` validates the policy obtained after the ``n``-th evaluation
    step (0-based). Returns the list of :class:`IterationRecord`.
    """
    seeds = np.random.SeedSequence(seed).spawn(n_iters + 1)
    params = initial_params(env.input_dim, n_components, np.random.default_rng(seeds[0]), init)
    records = []
    for n in range(n_iters):
        policy = GreedyPolicy(params, env)
        r = collect(env, policy, rollout.epsilon, rollout.episodes, rollout.horizon, seeds[n + 1])
        data = build_dataset(env, r.s, r.a, r.g, r.s_next, policy)
        start_loss = loss(params, data, alpha)
        params = policy_evaluation(params, data, alpha, armijo)
        end_loss = loss(params, data, alpha)
        val = validation_rollout(env, params, validation_horizon)
        records.append(
            IterationRecord(n, val.total_loss, start_loss, end_loss, val.steps_to_goal, val.success)
        )
        log.debug("iter %d: inner %.4g -> %.4g, validation loss %.4g",
                  n, start_loss, end_loss, val.total_loss)
    return records
