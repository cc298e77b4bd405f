"""Deterministic sampling-model environments.

Two environments are provided: an oriented gridworld with walls and lava
(discrete states and actions) and a point-mass reaching arena in the unit
box (continuous states and actions).  Both expose ``reset``/``transition``
over explicit state vectors so that learners, observation generators and
the WCD oracle can share them.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import Box, Discrete, GoalRecError, GoalSpec, as_state

NORTH, EAST, SOUTH, WEST = range(4)
ORIENTATIONS = {"N": NORTH, "E": EAST, "S": SOUTH, "W": WEST}
_DELTA = {NORTH: (0, -1), EAST: (1, 0), SOUTH: (0, 1), WEST: (-1, 0)}

TURN_LEFT, TURN_RIGHT, FORWARD, NOOP = range(4)
GRID_ACTION_NAMES = ("left", "right", "forward", "noop")

NONE, GOAL_REACHED, LAVA, HORIZON = "none", "goal_reached", "lava", "horizon"


class StepOutcome(NamedTuple):
    next_state: np.ndarray
    terminal: bool
    terminal_reason: str = NONE
    clamped: bool = False


def _cells(cells) -> frozenset:
    return frozenset((int(x), int(y)) for x, y in cells)


@dataclass(frozen=True)
class GridWorldSpec:
    width: int
    height: int
    start: tuple = (0, 0, EAST)
    walls: frozenset = field(default_factory=frozenset)
    lava: frozenset = field(default_factory=frozenset)
    lava_penalty: float | None = None
    max_steps: int = 100
    name: str = "gridworld"

    def __post_init__(self):
        object.__setattr__(self, "walls", _cells(self.walls))
        object.__setattr__(self, "lava", _cells(self.lava))
        x, y, o = self.start
        if isinstance(o, str):
            o = ORIENTATIONS[o]
        object.__setattr__(self, "start", (int(x), int(y), int(o)))
        if self.lava_penalty is None:
            object.__setattr__(self, "lava_penalty", float(self.width + self.height))
        if self.width < 1 or self.height < 1 or self.max_steps < 1:
            raise GoalRecError("grid dimensions and max_steps must be positive")
        if self.walls & self.lava:
            raise GoalRecError("lava and walls overlap")
        for cx, cy in self.walls | self.lava | {(x, y)}:
            if not self.in_bounds(cx, cy):
                raise GoalRecError(f"cell {(cx, cy)} out of bounds")
        if (x, y) in self.walls or (x, y) in self.lava:
            raise GoalRecError("start cell is blocked")
        if not 0 <= self.start[2] < 4:
            raise GoalRecError("orientation must be one of N, E, S, W")
        if self.lava_penalty < 0:
            raise GoalRecError("lava penalty must be nonnegative")

    def in_bounds(self, x, y) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def to_dict(self):
        return {
            "type": "gridworld",
            "name": self.name,
            "width": self.width,
            "height": self.height,
            "start": list(self.start),
            "walls": sorted(list(c) for c in self.walls),
            "lava": sorted(list(c) for c in self.lava),
            "lava_penalty": self.lava_penalty,
            "max_steps": self.max_steps,
        }


@dataclass(frozen=True)
class PointReachSpec:
    dim: int = 2
    a_max: float = 0.05
    goal_radius: float = 0.05
    max_steps: int = 100
    start: tuple | None = None
    start_noise: float = 0.0
    name: str = "pointreach"

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise GoalRecError("PointReach dim must be 2 or 3")
        if not 0 < self.a_max <= 1:
            raise GoalRecError("a_max must be in (0, 1]")
        if not 0 < self.goal_radius < 1:
            raise GoalRecError("goal_radius must be in (0, 1)")
        if self.max_steps < 1 or self.start_noise < 0:
            raise GoalRecError("invalid max_steps or start_noise")
        start = (0.5,) * self.dim if self.start is None else tuple(float(v) for v in self.start)
        if len(start) != self.dim or not all(0 <= v <= 1 for v in start):
            raise GoalRecError("start must lie in the unit box")
        object.__setattr__(self, "start", start)

    def to_dict(self):
        return {
            "type": "pointreach",
            "name": self.name,
            "dim": self.dim,
            "a_max": self.a_max,
            "goal_radius": self.goal_radius,
            "max_steps": self.max_steps,
            "start": list(self.start),
            "start_noise": self.start_noise,
        }


# -- pure dynamics --------------------------------------------------------


def _grid_pose(spec: GridWorldSpec, state):
    s = np.asarray(state, dtype=float).reshape(-1)
    if s.shape != (3,) or np.any(s != np.round(s)):
        raise GoalRecError(f"malformed grid state {state!r}")
    x, y, o = (int(v) for v in s)
    if not spec.in_bounds(x, y) or not 0 <= o < 4:
        raise GoalRecError(f"grid state {state!r} out of bounds")
    return x, y, o


def gridworld_step(spec: GridWorldSpec, state, action) -> StepOutcome:
    """Apply one oriented-grid action; goal termination is left to callers."""
    x, y, o = _grid_pose(spec, state)
    if not isinstance(action, (int, np.integer)) or not 0 <= int(action) < 4:
        raise GoalRecError(f"malformed grid action {action!r}")
    action = int(action)
    if action == TURN_LEFT:
        o = (o - 1) % 4
    elif action == TURN_RIGHT:
        o = (o + 1) % 4
    elif action == FORWARD:
        dx, dy = _DELTA[o]
        nx, ny = x + dx, y + dy
        if spec.in_bounds(nx, ny) and (nx, ny) not in spec.walls:
            x, y = nx, ny
    nxt = as_state((x, y, o))
    if (x, y) in spec.lava:
        return StepOutcome(nxt, True, LAVA)
    return StepOutcome(nxt, False, NONE)


def pointreach_step(spec: PointReachSpec, state, action, goal: GoalSpec | None = None, t: int | None = None) -> StepOutcome:
    """Additive point-mass dynamics clamped to the unit box.

    Out-of-range actions are clamped and reported via ``clamped``.  When a
    goal is given the step terminates inside its L-inf tolerance; when ``t``
    (the index of this step) is given the episode ends after ``max_steps``.
    """
    s = np.asarray(state, dtype=float).reshape(-1)
    a = np.asarray(action, dtype=float).reshape(-1)
    if s.shape != (spec.dim,) or a.shape != (spec.dim,):
        raise GoalRecError("state/action dimension mismatch")
    clipped = np.clip(a, -spec.a_max, spec.a_max)
    was_clamped = bool(np.any(clipped != a))
    nxt = as_state(np.clip(s + clipped, 0.0, 1.0))
    if goal is not None:
        tol = goal.tolerance if goal.tolerance > 0 else spec.goal_radius
        if np.max(np.abs(nxt - goal.target)) <= tol:
            return StepOutcome(nxt, True, GOAL_REACHED, was_clamped)
    if t is not None and t + 1 >= spec.max_steps:
        return StepOutcome(nxt, True, HORIZON, was_clamped)
    return StepOutcome(nxt, False, NONE, was_clamped)


def reward_l1(next_state, goal: GoalSpec, position_dims: int | None = None) -> float:
    """Negative L1 distance between the position part of a state and the goal."""
    pos = np.asarray(next_state, dtype=float).reshape(-1)
    if position_dims is not None:
        pos = pos[:position_dims]
    if pos.shape != goal.target.shape:
        raise GoalRecError("state/goal dimension mismatch")
    return -float(np.sum(np.abs(pos - goal.target)))


def enumerate_states(spec) -> list:
    """All in-bounds, non-wall grid poses in (y, x, orientation) raster order."""
    if not isinstance(spec, GridWorldSpec):
        raise GoalRecError("not enumerable")
    out = []
    for y in range(spec.height):
        for x in range(spec.width):
            if (x, y) in spec.walls:
                continue
            for o in range(4):
                out.append(as_state((x, y, o)))
    return out


# -- environment wrappers -------------------------------------------------


class GridWorld:
    """Oriented gridworld with per-goal termination and a step horizon."""

    kind = "gridworld"
    position_dims = 2

    def __init__(self, spec: GridWorldSpec):
        self.spec = spec
        self.action_space = Discrete(4)
        self.state_dim = 3
        self.max_steps = spec.max_steps

    @property
    def env_id(self):
        return self.spec.name

    def reset(self, rng=None) -> np.ndarray:
        return as_state(self.spec.start)

    def position(self, state) -> np.ndarray:
        return np.asarray(state, dtype=float)[:2]

    def at_goal(self, state, goal: GoalSpec) -> bool:
        return float(np.max(np.abs(self.position(state) - goal.target))) <= goal.tolerance

    def transition(self, state, action, goal: GoalSpec | None = None, t: int | None = None) -> StepOutcome:
        out = gridworld_step(self.spec, state, action)
        if out.terminal:
            return out
        if goal is not None and self.at_goal(out.next_state, goal):
            return StepOutcome(out.next_state, True, GOAL_REACHED)
        if t is not None and t + 1 >= self.max_steps:
            return StepOutcome(out.next_state, True, HORIZON)
        return out

    def reward(self, outcome: StepOutcome, goal: GoalSpec) -> float:
        r = reward_l1(outcome.next_state, goal, self.position_dims)
        if outcome.terminal_reason == LAVA:
            r -= self.spec.lava_penalty
        return r

    def check_goal(self, goal: GoalSpec):
        if goal.target.shape != (2,):
            raise GoalRecError("gridworld goals are (x, y) cells")

    def feature_spec(self) -> dict:
        return {"kind": "grid", "width": self.spec.width, "height": self.spec.height}

    def max_l1(self) -> float:
        return float(self.spec.width + self.spec.height - 2) or 1.0

    def to_dict(self):
        return self.spec.to_dict()


class PointReach:
    """Point mass in the unit box with bounded per-step displacement."""

    kind = "pointreach"

    def __init__(self, spec: PointReachSpec):
        self.spec = spec
        self.action_space = Box((-spec.a_max,) * spec.dim, (spec.a_max,) * spec.dim)
        self.state_dim = spec.dim
        self.position_dims = spec.dim
        self.max_steps = spec.max_steps
        self.clamp_warnings = 0

    @property
    def env_id(self):
        return self.spec.name

    def reset(self, rng=None) -> np.ndarray:
        start = np.asarray(self.spec.start, dtype=float)
        if self.spec.start_noise > 0 and rng is not None:
            start = start + rng.uniform(-self.spec.start_noise, self.spec.start_noise, size=start.shape)
        return as_state(np.clip(start, 0.0, 1.0))

    def position(self, state) -> np.ndarray:
        return np.asarray(state, dtype=float)

    def at_goal(self, state, goal: GoalSpec) -> bool:
        tol = goal.tolerance if goal.tolerance > 0 else self.spec.goal_radius
        return float(np.max(np.abs(self.position(state) - goal.target))) <= tol

    def transition(self, state, action, goal: GoalSpec | None = None, t: int | None = None) -> StepOutcome:
        out = pointreach_step(self.spec, state, action, goal, t)
        if out.clamped:
            self.clamp_warnings += 1
        return out

    def reward(self, outcome: StepOutcome, goal: GoalSpec) -> float:
        return reward_l1(outcome.next_state, goal, self.position_dims)

    def check_goal(self, goal: GoalSpec):
        if goal.target.shape != (self.spec.dim,):
            raise GoalRecError("goal dimension does not match the arena")

    def feature_spec(self) -> dict:
        return {"kind": "box", "dim": self.spec.dim}

    def max_l1(self) -> float:
        return float(self.spec.dim)

    def step_actions(self) -> list:
        """Fixed step set: every nonzero {-1,0,1}^dim direction scaled by a_max."""
        dirs = [d for d in itertools.product((-1, 0, 1), repeat=self.spec.dim) if any(d)]
        return [np.array(d, dtype=float) * self.spec.a_max for d in dirs]

    def to_dict(self):
        return self.spec.to_dict()


def featurize(feature_spec: dict, states) -> np.ndarray:
    """Map raw states (N x dim) to network inputs.

    Grid poses become normalized (x, y) plus a one-hot orientation; box
    states are centered to [-1, 1].
    """
    s = np.atleast_2d(np.asarray(states, dtype=float))
    if feature_spec["kind"] == "grid":
        w = max(feature_spec["width"] - 1, 1)
        h = max(feature_spec["height"] - 1, 1)
        onehot = np.zeros((s.shape[0], 4))
        onehot[np.arange(s.shape[0]), s[:, 2].astype(int) % 4] = 1.0
        return np.hstack([2.0 * s[:, :1] / w - 1.0, 2.0 * s[:, 1:2] / h - 1.0, onehot])
    return 2.0 * s - 1.0


def feature_dim(feature_spec: dict) -> int:
    return 6 if feature_spec["kind"] == "grid" else int(feature_spec["dim"])


def make_env(spec):
    if isinstance(spec, GridWorldSpec):
        return GridWorld(spec)
    if isinstance(spec, PointReachSpec):
        return PointReach(spec)
    if isinstance(spec, dict):
        return make_env(spec_from_dict(spec))
    raise GoalRecError(f"unknown environment spec {spec!r}")


def spec_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("type")
    if kind == "gridworld":
        d["start"] = tuple(d.get("start", (0, 0, EAST)))
        return GridWorldSpec(**d)
    if kind == "pointreach":
        if d.get("start") is not None:
            d["start"] = tuple(d["start"])
        return PointReachSpec(**d)
    raise GoalRecError(f"unknown environment type {kind!r}")


def bfs_distances(spec: GridWorldSpec, goal: GoalSpec) -> dict:
    """Minimum number of actions from every pose to the goal cell.

    Lava poses are absorbing failures and never lie on a path; poses that
    cannot reach the goal are absent from the result.
    """
    states = [tuple(int(v) for v in s) for s in enumerate_states(spec)]
    preds = {s: [] for s in states}
    gx, gy = (int(v) for v in goal.target)
    for s in states:
        if (s[0], s[1]) in spec.lava or (s[0], s[1]) == (gx, gy):
            continue
        for a in (TURN_LEFT, TURN_RIGHT, FORWARD):
            nxt = tuple(int(v) for v in gridworld_step(spec, s, a).next_state)
            if nxt != s and (nxt[0], nxt[1]) not in spec.lava:
                preds[nxt].append(s)
    dist = {}
    queue = deque()
    for s in states:
        if (s[0], s[1]) == (gx, gy):
            dist[s] = 0
            queue.append(s)
    while queue:
        s = queue.popleft()
        for p in preds[s]:
            if p not in dist:
                dist[p] = dist[s] + 1
                queue.append(p)
    return dist
