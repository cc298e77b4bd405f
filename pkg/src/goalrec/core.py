"""Shared domain types and the softmin goal posterior."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

SIGMA_FLOOR = 1e-4


class GoalRecError(Exception):
    """Base error for invalid goal-recognition inputs."""


class DivergenceError(GoalRecError):
    """Raised when training or an optimizer step produces non-finite numbers."""


def as_state(coords) -> np.ndarray:
    """Return ``coords`` as a read-only 1-D float array, validating finiteness."""
    arr = np.array(coords, dtype=float).reshape(-1)
    if arr.size == 0:
        raise GoalRecError("state must have dim >= 1")
    if not np.all(np.isfinite(arr)):
        raise GoalRecError("state coordinates must be finite")
    arr.setflags(write=False)
    return arr


# -- action spaces --------------------------------------------------------


@dataclass(frozen=True)
class Discrete:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise GoalRecError("Discrete arity must be positive")

    def contains(self, action) -> bool:
        return isinstance(action, (int, np.integer)) and 0 <= int(action) < self.n

    def to_dict(self):
        return {"type": "discrete", "n": self.n}


@dataclass(frozen=True)
class Box:
    low: tuple
    high: tuple

    def __post_init__(self):
        lo = np.asarray(self.low, dtype=float)
        hi = np.asarray(self.high, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise GoalRecError("Box bounds must be equal-length vectors")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo < hi)):
            raise GoalRecError("Box bounds must be finite with low < high")

    @property
    def dim(self) -> int:
        return len(self.low)

    @property
    def low_arr(self) -> np.ndarray:
        return np.asarray(self.low, dtype=float)

    @property
    def high_arr(self) -> np.ndarray:
        return np.asarray(self.high, dtype=float)

    def contains(self, action) -> bool:
        a = np.asarray(action, dtype=float)
        return a.shape == (self.dim,) and bool(np.all(a >= self.low_arr) and np.all(a <= self.high_arr))

    def clip(self, action) -> np.ndarray:
        return np.clip(np.asarray(action, dtype=float), self.low_arr, self.high_arr)

    def to_dict(self):
        return {"type": "box", "low": list(self.low), "high": list(self.high)}


ActionSpace = Union[Discrete, Box]


def space_from_dict(d) -> ActionSpace:
    if d["type"] == "discrete":
        return Discrete(int(d["n"]))
    return Box(tuple(float(v) for v in d["low"]), tuple(float(v) for v in d["high"]))


def action_to_vector(action) -> np.ndarray:
    """Embed an action as a numeric vector; discrete indices become 1-vectors."""
    if isinstance(action, (int, np.integer)):
        return np.array([float(action)])
    return np.asarray(action, dtype=float).reshape(-1)


# -- observations ---------------------------------------------------------


@dataclass(frozen=True)
class ObservationStep:
    t: int
    state: np.ndarray
    action: object = None  # int | np.ndarray | None

    def __post_init__(self):
        if self.t < 0:
            raise GoalRecError("step index must be nonnegative")
        object.__setattr__(self, "state", as_state(self.state))
        if self.action is not None and not isinstance(self.action, (int, np.integer)):
            a = np.array(self.action, dtype=float).reshape(-1)
            a.setflags(write=False)
            object.__setattr__(self, "action", a)
        elif self.action is not None:
            object.__setattr__(self, "action", int(self.action))

    @property
    def has_action(self) -> bool:
        return self.action is not None

    def __eq__(self, other):
        if not isinstance(other, ObservationStep):
            return NotImplemented
        if self.t != other.t or not np.array_equal(self.state, other.state):
            return False
        if self.action is None or other.action is None:
            return self.action is None and other.action is None
        return np.array_equal(action_to_vector(self.action), action_to_vector(other.action)) and (
            isinstance(self.action, int) == isinstance(other.action, int)
        )

    __hash__ = None


@dataclass(frozen=True)
class ObservationSequence:
    steps: tuple
    horizon: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        steps = tuple(self.steps)
        object.__setattr__(self, "steps", steps)
        if self.horizon < 1:
            raise GoalRecError("horizon must be positive")
        prev = -1
        dims = set()
        for st in steps:
            if st.t <= prev:
                raise GoalRecError("step indices must be strictly increasing")
            if st.t >= self.horizon:
                raise GoalRecError("step index beyond horizon")
            prev = st.t
            dims.add(st.state.size)
        if len(dims) > 1:
            raise GoalRecError("all states must share one dimension")

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    @property
    def has_actions(self) -> bool:
        return any(st.has_action for st in self.steps)

    @property
    def all_actions(self) -> bool:
        return all(st.has_action for st in self.steps)


# -- goals and problems ---------------------------------------------------


@dataclass(frozen=True)
class GoalSpec:
    id: str
    target: np.ndarray
    tolerance: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "target", as_state(self.target))
        if not self.tolerance >= 0:
            raise GoalRecError("goal tolerance must be nonnegative")

    def to_dict(self):
        return {"id": self.id, "target": [float(v) for v in self.target], "tolerance": float(self.tolerance)}

    @classmethod
    def from_dict(cls, d):
        return cls(str(d["id"]), d["target"], float(d.get("tolerance", 0.0)))


@dataclass(frozen=True)
class GRProblem:
    env_id: str
    goals: tuple
    observations: ObservationSequence
    true_goal: str | None = None

    def __post_init__(self):
        goals = tuple(self.goals)
        object.__setattr__(self, "goals", goals)
        if not goals:
            raise GoalRecError("no goals")
        ids = [g.id for g in goals]
        if len(set(ids)) != len(ids):
            raise GoalRecError("goal ids must be unique")

    @property
    def goal_ids(self) -> list:
        return [g.id for g in self.goals]


# -- policy distributions -------------------------------------------------


@dataclass(frozen=True)
class Categorical:
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).reshape(-1)
        if p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise GoalRecError("categorical probabilities must be nonnegative and sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)


@dataclass(frozen=True)
class DiagGaussian:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        m = np.array(self.mean, dtype=float).reshape(-1)
        s = np.maximum(np.array(self.std, dtype=float).reshape(-1), SIGMA_FLOOR)
        if m.shape != s.shape:
            raise GoalRecError("mean and std lengths differ")
        m.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "std", s)


PolicyDistribution = Union[Categorical, DiagGaussian]


class GoalPolicy:
    """Interface shared by the actor-critic and Q-table backends.

    Subclasses expose the action distribution the policy assigns to a state,
    a state value estimate and the greedy action set.
    """

    goal: GoalSpec
    action_space: ActionSpace
    backend: str = ""

    def distribution(self, state) -> PolicyDistribution:
        raise NotImplementedError

    def value(self, state) -> float:
        raise NotImplementedError

    def greedy_actions(self, state) -> list:
        raise NotImplementedError


# -- posterior ------------------------------------------------------------


@dataclass(frozen=True)
class RecognitionResult:
    posterior: dict
    ranking: list
    confidence: float
    distances: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def predicted(self) -> str:
        return self.ranking[0]

    def to_dict(self):
        return {
            "posterior": dict(self.posterior),
            "ranking": list(self.ranking),
            "confidence": self.confidence,
            "distances": dict(self.distances),
        }


def softmin_posterior(
    distances: Mapping[str, float],
    prior: Mapping[str, float] | None = None,
    beta: float = 1.0,
) -> dict:
    """Posterior over goals proportional to ``prior * exp(-beta * distance)``.

    The minimum distance is subtracted before exponentiating, so the result
    is shift invariant and never overflows.
    """
    if not distances:
        raise GoalRecError("no goals")
    if not beta > 0:
        raise GoalRecError("beta must be positive")
    keys = list(distances)
    d = np.array([float(distances[k]) for k in keys])
    if not np.all(np.isfinite(d)):
        raise GoalRecError("invalid distance")
    if prior is None:
        w = np.full(len(keys), 1.0 / len(keys))
    else:
        w = np.array([float(prior[k]) for k in keys])
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise GoalRecError("prior must be a probability distribution")
    logits = -beta * (d - d.min())
    unnorm = w * np.exp(logits)
    total = unnorm.sum()
    if total <= 0:
        raise GoalRecError("prior assigns zero mass to every goal")
    probs = unnorm / total
    return {k: float(p) for k, p in zip(keys, probs)}


def rank_goals(posterior: Mapping[str, float]) -> list:
    # stable: equal probabilities keep insertion order
    return sorted(posterior, key=lambda k: -posterior[k])


def confidence(posterior: Mapping[str, float] | Sequence[float]) -> float:
    """Gap between the two most probable goals relative to the top one."""
    values = list(posterior.values()) if isinstance(posterior, Mapping) else list(posterior)
    if len(values) < 2:
        raise GoalRecError("confidence needs at least two goals")
    top = sorted(values, reverse=True)
    p1, p2 = top[0], top[1]
    if p1 <= 0:
        return 0.0
    c = (p1 - p2) / p1
    return float(min(1.0, max(0.0, c)))


def stable_hash(text: str) -> int:
    """Process-independent 32-bit hash used to derive RNG sub-seeds."""
    import zlib

    return zlib.crc32(text.encode("utf-8"))


def sub_rng(*parts) -> np.random.Generator:
    """Deterministic generator from a mix of ints and strings."""
    ints = [p if isinstance(p, int) else stable_hash(str(p)) for p in parts]
    return np.random.default_rng([abs(int(i)) for i in ints])
