"""Declarative experiment configuration and the built-in desk-scale instances."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .core import GoalRecError, GoalSpec
from .envs import make_env, spec_from_dict
from .ppo import PpoConfig
from .recognize import MetricConfig, MetricKind
from .tabular import QConfig

LEARNERS = ("ppo", "tabular")

# learner defaults per environment kind; any key may be overridden in the config
PPO_DEFAULTS = {
    "gridworld": {"total_steps": 20_000, "lr_actor": 1e-3, "lr_critic": 1e-3},
    "pointreach": {"total_steps": 50_000, "lr_actor": 6e-4, "lr_critic": 6e-4},
}
TABULAR_DEFAULTS = {
    "gridworld": {"episodes": 1000, "alpha": 1e-3, "factor": 1.0},
    "pointreach": {"episodes": 2000, "alpha": 1e-2, "factor": 0.03},
}


@dataclass
class InstanceConfig:
    name: str
    env: dict
    goals: list

    def __post_init__(self):
        self.env = dict(self.env)
        self.env.setdefault("name", self.name)
        self.goals = [g if isinstance(g, GoalSpec) else GoalSpec.from_dict(g) for g in self.goals]
        ids = [g.id for g in self.goals]
        if len(ids) < 1 or len(set(ids)) != len(ids):
            raise GoalRecError(f"instance {self.name!r}: goal ids must be unique and nonempty")
        env = self.make_env()
        for g in self.goals:
            env.check_goal(g)

    @property
    def kind(self) -> str:
        return self.env["type"]

    def make_env(self):
        return make_env(spec_from_dict(self.env))

    def goal(self, goal_id) -> GoalSpec:
        for g in self.goals:
            if g.id == goal_id:
                return g
        raise GoalRecError(f"instance {self.name!r} has no goal {goal_id!r}")

    def to_dict(self):
        return {"name": self.name, "env": dict(self.env), "goals": [g.to_dict() for g in self.goals]}


def parse_metric(name: str, default_learner: str = "ppo"):
    """``"tabular:kl"`` -> ``("tabular", MetricKind.KL)``; bare names use ``default_learner``."""
    learner, _, metric = name.rpartition(":")
    learner = learner or default_learner
    if learner not in LEARNERS:
        raise GoalRecError(f"unknown learner {learner!r}")
    return learner, MetricKind.parse(metric)


@dataclass
class ExperimentConfig:
    instances: list
    metrics: list = field(default_factory=lambda: ["ppo:wasserstein", "ppo:zscore"])
    learner: str = "ppo"
    ppo: dict = field(default_factory=dict)
    tabular: dict = field(default_factory=dict)
    metric_config: dict = field(default_factory=dict)
    observability: list = field(default_factory=lambda: [10, 30, 50, 70, 100])
    noise: list = field(default_factory=lambda: [0])
    seeds: list = field(default_factory=lambda: list(range(10)))
    master_seed: int = 0
    observer: dict = field(default_factory=lambda: {"kind": "scripted", "jitter": 0.0})
    output_dir: str = "results"
    name: str = "experiment"

    def __post_init__(self):
        self.instances = [i if isinstance(i, InstanceConfig) else InstanceConfig(**i) for i in self.instances]
        if not self.instances:
            raise GoalRecError("config needs at least one instance")
        names = [i.name for i in self.instances]
        if len(set(names)) != len(names):
            raise GoalRecError("instance names must be unique")
        if isinstance(self.seeds, int):
            self.seeds = list(range(self.seeds))
        if self.learner not in LEARNERS:
            raise GoalRecError(f"unknown learner {self.learner!r}")
        if not self.metrics or not self.observability or not self.noise or not self.seeds:
            raise GoalRecError("metric, observability, noise and seed grids must be nonempty")
        for m in self.metrics:
            parse_metric(m, self.learner)
        for p in list(self.observability) + list(self.noise):
            if not 0 <= p <= 100:
                raise GoalRecError(f"percentage {p} outside [0, 100]")
        if self.observer.get("kind", "scripted") not in ("scripted", "ppo"):
            raise GoalRecError("observer kind must be 'scripted' or 'ppo'")
        # fail early on bad hyperparameter keys
        for inst in self.instances:
            self.ppo_config(inst, 0)
            self.q_config(inst, 0)
        self.metric_cfg()

    # -- derived configs --------------------------------------------------

    def ppo_config(self, inst: InstanceConfig, seed: int) -> PpoConfig:
        d = {**PPO_DEFAULTS[inst.kind], **self.ppo, "seed": seed}
        try:
            return PpoConfig.from_dict(d)
        except TypeError as exc:
            raise GoalRecError(f"bad ppo config: {exc}") from None

    def q_config(self, inst: InstanceConfig, seed: int) -> QConfig:
        d = {**TABULAR_DEFAULTS[inst.kind], **self.tabular, "seed": seed}
        try:
            return QConfig.from_dict(d)
        except TypeError as exc:
            raise GoalRecError(f"bad tabular config: {exc}") from None

    def metric_cfg(self, seed: int | None = None) -> MetricConfig:
        d = dict(self.metric_config)
        if seed is not None:
            d["seed"] = seed
        try:
            return MetricConfig.from_dict(d)
        except TypeError as exc:
            raise GoalRecError(f"bad metric config: {exc}") from None

    def instance(self, name: str | None = None) -> InstanceConfig:
        if name is None:
            return self.instances[0]
        for inst in self.instances:
            if inst.name == name:
                return inst
        raise GoalRecError(f"no instance named {name!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = copy.deepcopy(d)
        d.pop("format_version", None)
        try:
            return cls(**d)
        except TypeError as exc:
            raise GoalRecError(f"bad experiment config: {exc}") from None

    def to_dict(self):
        return {
            "name": self.name,
            "instances": [i.to_dict() for i in self.instances],
            "metrics": list(self.metrics),
            "learner": self.learner,
            "ppo": dict(self.ppo),
            "tabular": dict(self.tabular),
            "metric_config": dict(self.metric_config),
            "observability": list(self.observability),
            "noise": list(self.noise),
            "seeds": list(self.seeds),
            "master_seed": self.master_seed,
            "observer": dict(self.observer),
            "output_dir": self.output_dir,
        }


# -- built-in instances ---------------------------------------------------


def _goals(*targets, tolerance=0.0):
    return [{"id": f"g{i + 1}", "target": list(t), "tolerance": tolerance} for i, t in enumerate(targets)]


PRESETS = {
    "grid-2goal": {
        "env": {"type": "gridworld", "width": 7, "height": 7, "start": [3, 6, 0], "max_steps": 60},
        "goals": _goals((0, 0), (6, 0)),
    },
    "grid-3goal": {
        "env": {"type": "gridworld", "width": 7, "height": 7, "start": [3, 6, 0], "max_steps": 60},
        "goals": _goals((0, 0), (3, 0), (6, 0)),
    },
    "grid-lava": {
        "env": {
            "type": "gridworld", "width": 7, "height": 7, "start": [3, 6, 0], "max_steps": 60,
            "lava": [[2, 3], [3, 3], [4, 3]],
        },
        "goals": _goals((0, 0), (3, 0), (6, 0)),
    },
    "reach-2goal": {
        "env": {"type": "pointreach", "dim": 3, "start": [0.5, 0.2, 0.5], "start_noise": 0.05},
        "goals": _goals((0.35, 0.8, 0.6), (0.65, 0.8, 0.6)),
    },
    "reach-3goal": {
        "env": {"type": "pointreach", "dim": 3, "start": [0.5, 0.2, 0.5], "start_noise": 0.05},
        "goals": _goals((0.25, 0.8, 0.6), (0.5, 0.8, 0.75), (0.75, 0.8, 0.6)),
    },
    "reach-4goal": {
        "env": {"type": "pointreach", "dim": 3, "start": [0.5, 0.2, 0.5], "start_noise": 0.05},
        "goals": _goals((0.25, 0.8, 0.4), (0.25, 0.8, 0.8), (0.75, 0.8, 0.4), (0.75, 0.8, 0.8)),
    },
    "reach2d-2goal": {
        "env": {"type": "pointreach", "dim": 2, "start": [0.5, 0.2], "start_noise": 0.05},
        "goals": _goals((0.3, 0.8), (0.7, 0.8)),
    },
}


def preset(name: str) -> InstanceConfig:
    if name not in PRESETS:
        raise GoalRecError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    d = copy.deepcopy(PRESETS[name])
    return InstanceConfig(name=name, env=d["env"], goals=d["goals"])
