"""Tabular Q-learning baseline over a discretized state space."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .core import Box, Categorical, Discrete, GoalPolicy, GoalRecError, GoalSpec, space_from_dict

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Discretizer:
    factor: float
    origin: tuple = ()

    def __post_init__(self):
        if not self.factor > 0:
            raise GoalRecError("discretization factor must be positive")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))

    def _origin(self, n):
        return np.asarray(self.origin, dtype=float) if self.origin else np.zeros(n)

    def key(self, state) -> tuple:
        s = np.asarray(state, dtype=float).reshape(-1)
        # small epsilon keeps exact multiples (e.g. integer grid coords) in their own bin
        return tuple(int(v) for v in np.floor((s - self._origin(s.size)) / self.factor + 1e-9))

    def bin_center(self, key) -> np.ndarray:
        k = np.asarray(key, dtype=float)
        return self._origin(k.size) + (k + 0.5) * self.factor

    def to_dict(self):
        return {"factor": self.factor, "origin": list(self.origin)}


def discretize(d: Discretizer, state) -> tuple:
    return d.key(state)


class QTable:
    """Sparse state-key -> action-value table; absent keys read as zeros."""

    def __init__(self, arity: int):
        if arity < 1:
            raise GoalRecError("arity must be positive")
        self.arity = int(arity)
        self.values: dict = {}
        self.visits: dict = {}

    def __len__(self):
        return len(self.values)

    def __contains__(self, key):
        return key in self.values

    def get(self, key) -> np.ndarray:
        v = self.values.get(key)
        return np.zeros(self.arity) if v is None else v

    def row(self, key) -> np.ndarray:
        v = self.values.get(key)
        if v is None:
            v = self.values[key] = np.zeros(self.arity)
        return v

    def copy(self) -> "QTable":
        out = QTable(self.arity)
        out.values = {k: v.copy() for k, v in self.values.items()}
        out.visits = {k: v.copy() for k, v in self.visits.items()}
        return out


def q_update(table: QTable, key, action: int, reward: float, next_key, alpha: float, gamma: float, terminal: bool) -> QTable:
    """In-place one-step Q-learning backup; returns the table for chaining."""
    if not (0 < alpha <= 1 and 0 <= gamma <= 1):
        raise GoalRecError("alpha must be in (0, 1] and gamma in [0, 1]")
    row = table.row(key)
    target = reward if terminal else reward + gamma * float(np.max(table.get(next_key)))
    row[action] += alpha * (target - row[action])
    counts = table.visits.get(key)
    if counts is None:
        counts = table.visits[key] = np.zeros(table.arity, dtype=np.int64)
    counts[action] += 1
    return table


@dataclass(frozen=True)
class QConfig:
    episodes: int = 2000
    alpha: float = 0.01
    gamma: float = 0.99
    eps_start: float = 1.0
    eps_end: float = 0.05
    factor: float = 0.03
    temperature: float = 1.0
    prob_floor: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.episodes < 0 or not 0 < self.alpha <= 1 or not 0 <= self.gamma <= 1:
            raise GoalRecError("invalid Q-learning episodes/alpha/gamma")
        if not (0 <= self.eps_end <= 1 and 0 <= self.eps_start <= 1):
            raise GoalRecError("exploration rates must lie in [0, 1]")
        if self.factor <= 0 or self.temperature <= 0 or not 0 <= self.prob_floor < 1:
            raise GoalRecError("invalid discretization factor, temperature or probability floor")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        return asdict(self)


class QTablePolicy(GoalPolicy):
    """Softmax policy and max-Q value read from a Q-table.

    For continuous arenas the table indexes a fixed set of step vectors;
    :attr:`actions` maps table indices back to environment actions.
    """

    backend = "qtable"

    def __init__(self, goal, action_space, discretizer, table, actions=None, temperature=1.0, prob_floor=0.01, metadata=None):
        self.goal = goal
        self.action_space = action_space
        self.discretizer = discretizer
        self.table = table
        self.actions = None if actions is None else [np.asarray(a, dtype=float) for a in actions]
        self.temperature = float(temperature)
        self.prob_floor = float(prob_floor)
        self.metadata = dict(metadata or {})
        n = table.arity
        if isinstance(action_space, Discrete) and action_space.n != n:
            raise GoalRecError("table arity does not match the discrete action space")
        if isinstance(action_space, Box) and (self.actions is None or len(self.actions) != n):
            raise GoalRecError("continuous Q-table policies need one step vector per table action")

    def key(self, state):
        return self.discretizer.key(state)

    def visited(self, state) -> bool:
        return self.key(state) in self.table

    def probs(self, state) -> np.ndarray:
        q = self.table.get(self.key(state)) / self.temperature
        p = np.exp(q - q.max())
        p /= p.sum()
        if self.prob_floor > 0:
            p = np.maximum(p, self.prob_floor)
            p /= p.sum()
        return p

    def distribution(self, state):
        return Categorical(self.probs(state))

    def value(self, state) -> float:
        return float(np.max(self.table.get(self.key(state))))

    def greedy_indices(self, state) -> list:
        q = self.table.get(self.key(state))
        return [int(i) for i in np.flatnonzero(q == q.max())]

    def index_to_action(self, i):
        return int(i) if self.actions is None else self.actions[i]

    def greedy_actions(self, state) -> list:
        return [self.index_to_action(i) for i in self.greedy_indices(state)]

    def to_dict(self):
        entries = []
        for k in sorted(self.table.values):
            visits = self.table.visits.get(k, np.zeros(self.table.arity, dtype=np.int64))
            entries.append([list(k), [float(v) for v in self.table.values[k]], [int(c) for c in visits]])
        return {
            "backend": self.backend,
            "goal": self.goal.to_dict(),
            "action_space": self.action_space.to_dict(),
            "discretizer": self.discretizer.to_dict(),
            "arity": self.table.arity,
            "actions": None if self.actions is None else [[float(v) for v in a] for a in self.actions],
            "temperature": self.temperature,
            "prob_floor": self.prob_floor,
            "entries": entries,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d):
        table = QTable(int(d["arity"]))
        for key, values, visits in d["entries"]:
            k = tuple(int(v) for v in key)
            table.values[k] = np.asarray(values, dtype=float)
            table.visits[k] = np.asarray(visits, dtype=np.int64)
        disc = d["discretizer"]
        return cls(
            GoalSpec.from_dict(d["goal"]), space_from_dict(d["action_space"]),
            Discretizer(float(disc["factor"]), tuple(disc.get("origin", ()))), table,
            d.get("actions"), d.get("temperature", 1.0), d.get("prob_floor", 0.01), d.get("metadata"),
        )


def table_actions(env):
    """Table action set for ``env``: native indices, or the fixed step set for boxes."""
    if isinstance(env.action_space, Discrete):
        return None, env.action_space.n
    steps = env.step_actions()
    return steps, len(steps)


def default_discretizer(env, factor: float) -> Discretizer:
    # grid poses are already integral: one bin per cell and orientation
    if env.kind == "gridworld":
        return Discretizer(1.0, (0.0, 0.0, 0.0))
    return Discretizer(factor, (0.0,) * env.state_dim)


def train_q_policy(env, goal: GoalSpec, config: QConfig, discretizer: Discretizer | None = None) -> QTablePolicy:
    """Epsilon-greedy Q-learning for ``config.episodes`` episodes."""
    env.check_goal(goal)
    rng = np.random.default_rng([config.seed & 0xFFFFFFFF, 0x5154])
    disc = discretizer or default_discretizer(env, config.factor)
    actions, arity = table_actions(env)
    table = QTable(arity)
    n_ep = config.episodes
    for ep in range(n_ep):
        frac = ep / max(n_ep - 1, 1)
        eps = config.eps_start + (config.eps_end - config.eps_start) * frac
        state = env.reset(rng)
        key = disc.key(state)
        for t in range(env.max_steps):
            if rng.random() < eps:
                a = int(rng.integers(arity))
            else:
                q = table.get(key)
                best = np.flatnonzero(q == q.max())
                a = int(best[0] if best.size == 1 else best[rng.integers(best.size)])
            env_action = a if actions is None else actions[a]
            out = env.transition(state, env_action, goal, t)
            r = env.reward(out, goal)
            next_key = disc.key(out.next_state)
            # horizon cuts are not true terminals
            terminal = out.terminal and out.terminal_reason != "horizon"
            q_update(table, key, a, r, next_key, config.alpha, config.gamma, terminal)
            if out.terminal:
                break
            state, key = out.next_state, next_key
    log.debug("goal %s: %d table rows after %d episodes", goal.id, len(table), n_ep)
    return QTablePolicy(
        goal, env.action_space, disc, table, actions, config.temperature, config.prob_floor,
        {"learner": "tabular", "env_id": env.env_id, "episodes": n_ep, "seed": config.seed},
    )

