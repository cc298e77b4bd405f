"""Observation-to-policy distances and the goal recognition pipeline."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    SIGMA_FLOOR, Box, Categorical, GoalRecError, GRProblem, RecognitionResult,
    action_to_vector, confidence, rank_goals, softmin_posterior, stable_hash,
)
from .nn import dist_mean_std, dist_sample_many

VALUE_FLOOR = 1e-6


class MetricKind(enum.Enum):
    WASSERSTEIN = "wasserstein"
    ZSCORE = "zscore"
    STATE_ONLY = "state_only"
    KL = "kl"
    MEAN_ACTION = "mean_action"

    @classmethod
    def parse(cls, name) -> "MetricKind":
        if isinstance(name, cls):
            return name
        aliases = {"z-score": "zscore", "z_score": "zscore", "state-only": "state_only", "kl_divergence": "kl",
                   "mean_action_distance": "mean_action", "mean-action": "mean_action"}
        key = str(name).lower()
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise GoalRecError(f"unknown metric {name!r}") from None


@dataclass(frozen=True)
class MetricConfig:
    mc_samples: int = 32
    sigma_floor: float = SIGMA_FLOOR
    eps_smooth: float = 0.01
    beta: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.mc_samples < 1:
            raise GoalRecError("mc_samples must be >= 1")
        if not 0 < self.eps_smooth < 1 or self.sigma_floor <= 0 or self.beta <= 0:
            raise GoalRecError("invalid metric config")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _steps(obs):
    return list(obs.steps) if hasattr(obs, "steps") else list(obs)


def _check_action(policy, action):
    space = policy.action_space
    if isinstance(space, Box):
        if isinstance(action, (int, np.integer)) or np.asarray(action).shape != (space.dim,):
            raise GoalRecError("observed action does not match the policy's continuous action space")
    elif not isinstance(action, (int, np.integer)):
        raise GoalRecError("observed action does not match the policy's discrete action space")


def _spot_rng(cfg: MetricConfig, goal_id: str, t: int):
    return np.random.default_rng([cfg.seed & 0xFFFFFFFF, stable_hash(goal_id), int(t)])


def _require_actions(obs):
    steps = _steps(obs)
    if any(not st.has_action for st in steps):
        raise GoalRecError("state-only sequence")
    return steps


# -- Wasserstein ----------------------------------------------------------


def wasserstein_spot(state, action, policy, cfg: MetricConfig, rng) -> float:
    """Mean L1 gap between the observed action and ``mc_samples`` policy draws."""
    _check_action(policy, action)
    dist = policy.distribution(state)
    draws = dist_sample_many(dist, rng, cfg.mc_samples)
    if isinstance(dist, Categorical) and getattr(policy, "actions", None) is not None:
        # Q-table step sets: compare in environment action units
        vecs = np.array(policy.actions)
        draws = vecs[draws[:, 0].astype(int)]
    a = action_to_vector(action)
    return float(np.mean(np.sum(np.abs(draws - a), axis=1)))


def wasserstein_distance(obs, policy, cfg: MetricConfig) -> float:
    steps = _require_actions(obs)
    if not steps:
        return 0.0
    spots = [wasserstein_spot(st.state, st.action, policy, cfg, _spot_rng(cfg, policy.goal.id, st.t)) for st in steps]
    return float(np.mean(spots))


# -- Z-score --------------------------------------------------------------


def zscore_spot(state, action, policy, cfg: MetricConfig) -> float:
    """Mean over action dimensions of ``|a - mu| / sigma`` under the policy at ``state``."""
    _check_action(policy, action)
    mean, std = dist_mean_std(policy.distribution(state))
    a = action_to_vector(action)
    return float(np.mean(np.abs(a - mean) / np.maximum(std, cfg.sigma_floor)))


def zscore_distance(obs, policy, cfg: MetricConfig) -> float:
    steps = _require_actions(obs)
    if not steps:
        return 0.0
    return float(np.mean([zscore_spot(st.state, st.action, policy, cfg) for st in steps]))


# -- state only -----------------------------------------------------------


def state_only_distance(obs, policy, cfg: MetricConfig | None = None, diagnostics: dict | None = None) -> float:
    """Reciprocal of the summed state values along the observed states.

    Values from the shaped reward are nonpositive, so the goal whose value
    function finds the states most promising gets the most negative
    distance.  A near-zero sum is pushed to ``-VALUE_FLOOR`` (sign kept).
    """
    steps = _steps(obs)
    if not steps:
        return 0.0
    total = float(sum(policy.value(st.state) for st in steps))
    if abs(total) < VALUE_FLOOR:
        if diagnostics is not None:
            diagnostics.setdefault("value_floor_hits", []).append(policy.goal.id)
        total = VALUE_FLOOR if total > 0 else -VALUE_FLOOR
    return 1.0 / total


# -- tabular baselines -----------------------------------------------------


def kl_distance(obs, policy, cfg: MetricConfig) -> float:
    """Mean KL(smoothed observed one-hot || floored policy probabilities)."""
    steps = _require_actions(obs)
    if isinstance(policy.action_space, Box):
        raise GoalRecError("KL requires discrete")
    if not steps:
        return 0.0
    eps = cfg.eps_smooth
    total = 0.0
    for st in steps:
        _check_action(policy, st.action)
        pi = policy.distribution(st.state).probs
        n = pi.size
        q = np.maximum(pi, eps)
        q = q / q.sum()
        p = np.full(n, eps / (n - 1)) if n > 1 else np.ones(1)
        p[int(st.action)] = 1.0 - eps if n > 1 else 1.0
        total += float(np.sum(p * np.log(p / q)))
    return total / len(steps)


def mean_action_distance(obs, policy, cfg: MetricConfig | None = None, diagnostics: dict | None = None) -> float:
    """Mean L1 gap between observed actions and the policy's greedy action.

    Tied greedy actions (including every action of an unvisited table
    state) are averaged.
    """
    steps = _require_actions(obs)
    if policy.backend == "mlp_ac" and isinstance(policy.action_space, Box):
        raise GoalRecError("mean action distance requires a categorical or Q-table policy")
    if not steps:
        return 0.0
    gaps = []
    unvisited = 0
    for st in steps:
        _check_action(policy, st.action)
        greedy = policy.greedy_actions(st.state)
        if hasattr(policy, "visited") and not policy.visited(st.state):
            unvisited += 1
        a = action_to_vector(st.action)
        gaps.append(float(np.mean([np.sum(np.abs(action_to_vector(g) - a)) for g in greedy])))
    if diagnostics is not None and unvisited:
        diagnostics.setdefault("unvisited_states", {})[policy.goal.id] = unvisited
    return float(np.mean(gaps))


# -- pipeline -------------------------------------------------------------


def distance(metric, obs, policy, cfg: MetricConfig, diagnostics: dict | None = None) -> float:
    metric = MetricKind.parse(metric)
    if metric is MetricKind.WASSERSTEIN:
        return wasserstein_distance(obs, policy, cfg)
    if metric is MetricKind.ZSCORE:
        return zscore_distance(obs, policy, cfg)
    if metric is MetricKind.STATE_ONLY:
        return state_only_distance(obs, policy, cfg, diagnostics)
    if metric is MetricKind.KL:
        return kl_distance(obs, policy, cfg)
    return mean_action_distance(obs, policy, cfg, diagnostics)


def _check_compatible(metric: MetricKind, obs, policy):
    steps = _steps(obs)
    if metric is MetricKind.STATE_ONLY:
        if any(st.has_action for st in steps):
            raise GoalRecError("state-only metric expects a state-only observation sequence")
        return
    if any(not st.has_action for st in steps):
        raise GoalRecError(f"{metric.value} metric needs actions in every observation")
    if metric is MetricKind.KL and isinstance(policy.action_space, Box):
        raise GoalRecError("KL requires discrete")
    if metric is MetricKind.ZSCORE and policy.backend == "qtable" and isinstance(policy.action_space, Box):
        raise GoalRecError("z-score needs a policy over the native continuous actions")
    if metric is MetricKind.MEAN_ACTION and policy.backend == "mlp_ac" and isinstance(policy.action_space, Box):
        raise GoalRecError("mean action distance requires a categorical or Q-table policy")


def recognize(problem: GRProblem, policies: dict, metric, cfg: MetricConfig | None = None, prior=None) -> RecognitionResult:
    """Score the observations against every goal's policy and return the posterior."""
    cfg = cfg or MetricConfig()
    metric = MetricKind.parse(metric)
    diagnostics: dict = {}
    distances = {}
    for goal in problem.goals:
        if goal.id not in policies:
            raise GoalRecError(f"missing policy for goal {goal.id!r}")
        policy = policies[goal.id]
        _check_compatible(metric, problem.observations, policy)
        d = distance(metric, problem.observations, policy, cfg, diagnostics)
        if not math.isfinite(d):
            raise GoalRecError(f"non-finite distance for goal {goal.id!r}")
        distances[goal.id] = d
    posterior = softmin_posterior(distances, prior, cfg.beta)
    return RecognitionResult(posterior, rank_goals(posterior), confidence(posterior) if len(posterior) > 1 else 1.0, distances, diagnostics)
