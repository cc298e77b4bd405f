"""Observed-agent trajectories and their degradation (missing steps, noisy actions)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Box, GoalPolicy, GoalRecError, GoalSpec, ObservationSequence, ObservationStep
from .envs import FORWARD, TURN_LEFT, TURN_RIGHT, bfs_distances


class BfsAgent:
    """Optimal gridworld agent; breaks ties between optimal actions at random."""

    def __init__(self, env, goal: GoalSpec):
        self.env = env
        self.goal = goal
        self.dist = bfs_distances(env.spec, goal)

    def act(self, state, rng):
        key = tuple(int(v) for v in state)
        if key not in self.dist:
            raise GoalRecError(f"goal {self.goal.id!r} unreachable from {key}")
        d = self.dist[key]
        best = []
        for a in (TURN_LEFT, TURN_RIGHT, FORWARD):
            nxt = self.env.transition(state, a).next_state
            if self.dist.get(tuple(int(v) for v in nxt), math.inf) == d - 1:
                best.append(a)
        return best[int(rng.integers(len(best)))]


class LineAgent:
    """Point-reach controller moving in a straight line toward the goal.

    ``jitter`` adds Gaussian noise with std ``jitter * a_max`` to each step.
    """

    def __init__(self, env, goal: GoalSpec, jitter: float = 0.0):
        self.env = env
        self.goal = goal
        self.jitter = float(jitter)

    def act(self, state, rng):
        a_max = self.env.spec.a_max
        delta = self.goal.target - np.asarray(state, dtype=float)
        span = float(np.max(np.abs(delta)))
        step = delta if span <= a_max else delta * (a_max / span)
        if self.jitter > 0:
            step = step + rng.normal(0.0, self.jitter * a_max, size=step.shape)
        return np.clip(step, -a_max, a_max)


class PolicyAgent:
    """Wraps a trained :class:`GoalPolicy`; samples unless ``deterministic``."""

    def __init__(self, policy: GoalPolicy, deterministic: bool = False):
        self.policy = policy
        self.deterministic = deterministic

    def act(self, state, rng):
        if hasattr(self.policy, "act"):
            return self.policy.act(state, rng, self.deterministic)[0]
        return self.policy.greedy_actions(state)[0]


def scripted_agent(env, goal: GoalSpec, jitter: float = 0.0):
    return BfsAgent(env, goal) if env.kind == "gridworld" else LineAgent(env, goal, jitter)


def generate_trajectory(env, goal: GoalSpec, agent=None, seed: int = 0) -> ObservationSequence:
    """Roll ``agent`` from the environment start until termination.

    ``meta`` records the terminal reason, the final state and whether
    the episode was cut by the horizon.
    """
    env.check_goal(goal)
    agent = agent or scripted_agent(env, goal)
    if isinstance(agent, GoalPolicy):
        agent = PolicyAgent(agent)
    rng = np.random.default_rng([seed & 0xFFFFFFFF, 0x0B5])
    state = env.reset(rng)
    steps = []
    reason = "horizon"
    for t in range(env.max_steps):
        a = agent.act(state, rng)
        if isinstance(env.action_space, Box):
            a = env.action_space.clip(a)
        out = env.transition(state, a, goal, t)
        steps.append(ObservationStep(t, state, a))
        state = out.next_state
        if out.terminal:
            reason = out.terminal_reason
            break
    meta = {
        "goal": goal.id,
        "terminal_reason": reason,
        "final_state": [float(v) for v in state],
        "truncated": reason != "goal_reached",
    }
    return ObservationSequence(tuple(steps), max(len(steps), 1), meta)


def degrade_observability(obs: ObservationSequence, pct: float, seed: int = 0) -> ObservationSequence:
    """Keep each step independently with probability ``pct / 100``."""
    if not 0 <= pct <= 100:
        raise GoalRecError("observability must be within [0, 100]")
    rng = np.random.default_rng([seed & 0xFFFFFFFF, 0x0D5])
    keep = rng.random(len(obs.steps)) < pct / 100.0
    kept = tuple(st for st, k in zip(obs.steps, keep) if k)
    return ObservationSequence(kept, obs.horizon, {**obs.meta, "observability": pct})


def noise_count(pct: float, n: int) -> int:
    # round half up so 2.5 -> 3 rather than banker's rounding
    return int(math.floor(pct / 100.0 * n + 0.5))


def inject_noise(obs: ObservationSequence, pct: float, env, seed: int = 0) -> ObservationSequence:
    """Replace the action of exactly ``round(pct% * len)`` uniformly chosen steps.

    Discrete actions are redrawn uniformly among the other actions;
    continuous ones are pushed by a random offset of L-inf size ``a_max``
    and clamped back into the action box.
    """
    if not 0 <= pct <= 100:
        raise GoalRecError("noise ratio must be within [0, 100]")
    if any(not st.has_action for st in obs.steps):
        raise GoalRecError("noise injection needs actions on every step")
    n = len(obs.steps)
    k = noise_count(pct, n)
    rng = np.random.default_rng([seed & 0xFFFFFFFF, 0x401])
    chosen = set(int(i) for i in rng.choice(n, size=k, replace=False)) if k else set()
    space = env.action_space
    steps = []
    for i, st in enumerate(obs.steps):
        if i not in chosen:
            steps.append(st)
            continue
        if isinstance(space, Box):
            direction = rng.uniform(-1.0, 1.0, size=space.dim)
            direction /= max(float(np.max(np.abs(direction))), 1e-12)
            a = space.clip(st.action + direction * space.high_arr)
        else:
            others = [x for x in range(space.n) if x != st.action]
            a = others[int(rng.integers(len(others)))]
        steps.append(ObservationStep(st.t, st.state, a))
    meta = {**obs.meta, "noise": pct, "noisy_steps": sorted(obs.steps[i].t for i in chosen)}
    return ObservationSequence(tuple(steps), obs.horizon, meta)


def state_only_projection(obs: ObservationSequence) -> ObservationSequence:
    steps = tuple(ObservationStep(st.t, st.state, None) for st in obs.steps)
    return ObservationSequence(steps, obs.horizon, dict(obs.meta))


@dataclass(frozen=True)
class DegradeSpec:
    observability_pct: float = 100
    noise_pct: float = 0
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.observability_pct <= 100 and 0 <= self.noise_pct <= 100):
            raise GoalRecError("percentages must be within [0, 100]")

    def apply(self, obs: ObservationSequence, env) -> ObservationSequence:
        """Noise first (on the complete trajectory), then drop steps."""
        if self.noise_pct:
            obs = inject_noise(obs, self.noise_pct, env, self.seed)
        return degrade_observability(obs, self.observability_pct, self.seed)
