"""Recognition scoring, worst-case distinctiveness and the experiment runner."""
from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import GoalRecError, GoalSpec, GRProblem, RecognitionResult, stable_hash
from .envs import FORWARD, TURN_LEFT, TURN_RIGHT, GridWorldSpec, bfs_distances, gridworld_step
from .obsgen import DegradeSpec, PolicyAgent, generate_trajectory, scripted_agent, state_only_projection
from .ppo import train_goal_policy
from .recognize import MetricKind, recognize
from .tabular import train_q_policy

log = logging.getLogger(__name__)

SCORE_FIELDS = ("accuracy", "precision", "recall", "f_score", "confidence")


# -- classification metrics ----------------------------------------------


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other):
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)


def predicted_goals(result: RecognitionResult, tol: float = 1e-12) -> set:
    """Every goal attaining the maximum posterior (ties give several positives)."""
    top = max(result.posterior.values())
    return {g for g, p in result.posterior.items() if p >= top - tol}


def confusion_counts(results) -> ConfusionCounts:
    """Accumulate per-goal outcomes over ``(result, true_goal_id)`` pairs."""
    tp = fp = tn = fn = 0
    for result, true_goal in results:
        if true_goal not in result.posterior:
            raise GoalRecError(f"true goal {true_goal!r} absent from posterior")
        positives = predicted_goals(result)
        for g in result.posterior:
            if g in positives:
                tp, fp = (tp + 1, fp) if g == true_goal else (tp, fp + 1)
            else:
                fn, tn = (fn + 1, tn) if g == true_goal else (fn, tn + 1)
    return ConfusionCounts(tp, fp, tn, fn)


def prf_metrics(c: ConfusionCounts):
    """(accuracy, precision, recall, f_score) with 0/0 read as 0."""

    def ratio(a, b):
        return a / b if b else 0.0

    accuracy = ratio(c.tp + c.tn, c.total)
    precision = ratio(c.tp, c.tp + c.fp)
    recall = ratio(c.tp, c.tp + c.fn)
    f = ratio(2 * precision * recall, precision + recall)
    return accuracy, precision, recall, f


# -- worst-case distinctiveness ------------------------------------------


@dataclass(frozen=True)
class WcdReport:
    wcd: int
    optimal_plan_length: dict
    delta: float = 0.0
    approximate: bool = False

    @property
    def ratio(self) -> float:
        longest = max(self.optimal_plan_length.values(), default=0)
        return self.wcd / longest if longest else 0.0

    def to_dict(self):
        return {
            "wcd": self.wcd,
            "optimal_plan_length": dict(self.optimal_plan_length),
            "ratio": self.ratio,
            "delta": self.delta,
            "approximate": self.approximate,
        }


def _key(state):
    return tuple(int(v) for v in state)


def _optimal_moves(spec, dist, s):
    d = dist.get(s)
    if d is None or d == 0:
        return []
    out = []
    for a in (TURN_LEFT, TURN_RIGHT, FORWARD):
        nxt = _key(gridworld_step(spec, s, a).next_state)
        if dist.get(nxt) == d - 1:
            out.append((a, nxt))
    return out


def wcd_discrete(spec: GridWorldSpec, goals, start=None) -> WcdReport:
    """Longest action prefix shared by cost-optimal plans toward two different goals.

    A prefix is shared iff every step along it is optimal for both goals,
    so the longest one is a longest path in the intersection of the two
    goals' optimal-move DAGs, found by memoized search.
    """
    goals = list(goals)
    start = _key(start if start is not None else spec.start)
    dists = {}
    for g in goals:
        dist = bfs_distances(spec, g)
        if start not in dist:
            raise GoalRecError(f"goal {g.id!r} unreachable")
        dists[g.id] = dist
    lengths = {g.id: dists[g.id][start] for g in goals}
    best = 0
    for ga, gb in itertools.combinations(goals, 2):
        da, db = dists[ga.id], dists[gb.id]
        memo = {}

        def longest(s):
            if s in memo:
                return memo[s]
            nb = {a: n for a, n in _optimal_moves(spec, db, s)}
            val = 0
            for a, n in _optimal_moves(spec, da, s):
                if a in nb:
                    val = max(val, 1 + longest(n))
            memo[s] = val
            return val

        best = max(best, longest(start))
    return WcdReport(best, lengths)


def enumerate_optimal_plans(spec: GridWorldSpec, goal: GoalSpec, start=None) -> list:
    """Every cost-optimal action sequence from ``start`` to ``goal`` (exponential)."""
    dist = bfs_distances(spec, goal)
    s0 = _key(start if start is not None else spec.start)
    if s0 not in dist:
        raise GoalRecError(f"goal {goal.id!r} unreachable")
    plans = []

    def walk(s, prefix):
        if dist[s] == 0:
            plans.append(tuple(prefix))
            return
        for a, n in _optimal_moves(spec, dist, s):
            walk(n, prefix + [a])

    walk(s0, [])
    return plans


def _common_prefix(a, b, same=lambda x, y: x == y) -> int:
    n = 0
    for x, y in zip(a, b):
        if not same(x, y):
            break
        n += 1
    return n


def wcd_continuous_approx(trajectories: dict, delta: float) -> WcdReport:
    """Approximate WCD from sampled state trajectories per goal.

    States closer than ``delta`` in L-inf count as equal; the report is
    labeled approximate.  The prefix is counted in matching states.
    """
    if not trajectories or any(len(v) == 0 for v in trajectories.values()):
        raise GoalRecError("each goal needs at least one trajectory")
    if delta < 0:
        raise GoalRecError("delta must be nonnegative")

    def same(x, y):
        return float(np.max(np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))) <= delta

    best = 0
    for ga, gb in itertools.combinations(list(trajectories), 2):
        for ta in trajectories[ga]:
            for tb in trajectories[gb]:
                best = max(best, _common_prefix(ta, tb, same))
    lengths = {g: int(min(len(t) for t in ts)) for g, ts in trajectories.items()}
    return WcdReport(best, lengths, float(delta), approximate=True)


# -- experiment runner ---------------------------------------------------


def _mean_std(values):
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


@dataclass
class ResultsTable:
    rows: list = field(default_factory=list)

    CSV_COLUMNS = ("instance", "metric", "observability", "noise", "seed", "true_goal", "predicted") + SCORE_FIELDS

    def cells(self):
        out = {}
        for r in self.rows:
            out.setdefault((r["instance"], r["metric"], r["observability"], r["noise"]), []).append(r)
        return out

    def aggregates(self) -> list:
        """Mean and sample std per cell, plus metrics pooled over the cell's problems."""
        out = []
        for (inst, metric, obs, noise), rows in self.cells().items():
            agg = {"instance": inst, "metric": metric, "observability": obs, "noise": noise, "n": len(rows)}
            for f in SCORE_FIELDS:
                agg[f + "_mean"], agg[f + "_std"] = _mean_std([r[f] for r in rows])
            pooled = ConfusionCounts()
            for r in rows:
                pooled = pooled + ConfusionCounts(r["tp"], r["fp"], r["tn"], r["fn"])
            agg.update(zip(("pooled_accuracy", "pooled_precision", "pooled_recall", "pooled_f_score"), prf_metrics(pooled)))
            out.append(agg)
        return out

    def select(self, **match) -> list:
        return [r for r in self.rows if all(r[k] == v for k, v in match.items())]

    def mean(self, field_name, **match) -> float:
        rows = self.select(**match)
        if not rows:
            raise GoalRecError(f"no rows match {match}")
        return float(np.mean([r[field_name] for r in rows]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in self.CSV_COLUMNS])
        return buf.getvalue()

    def to_json_dict(self) -> dict:
        return {"rows": self.rows, "aggregates": self.aggregates()}

    @classmethod
    def from_json_dict(cls, d) -> "ResultsTable":
        return cls(list(d["rows"]))


def _score_row(result: RecognitionResult, true_goal: str) -> dict:
    c = confusion_counts([(result, true_goal)])
    acc, prec, rec, f = prf_metrics(c)
    return {
        "accuracy": acc, "precision": prec, "recall": rec, "f_score": f, "confidence": result.confidence,
        "tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn,
    }


class PolicyStore:
    """Trains goal policies on demand and memoizes them by (instance, learner, seed, goal)."""

    def __init__(self, config):
        self.config = config
        self._cache = {}

    def training_seed(self, inst, learner, seed, goal_id) -> int:
        return stable_hash(f"{self.config.master_seed}/{inst.name}/{learner}/{seed}/{goal_id}") & 0x7FFFFFFF

    def get(self, inst, learner, seed, goal: GoalSpec):
        key = (inst.name, learner, seed, goal.id)
        if key not in self._cache:
            env = inst.make_env()
            tseed = self.training_seed(inst, learner, seed, goal.id)
            if learner == "ppo":
                pol = train_goal_policy(env, goal, self.config.ppo_config(inst, tseed))
            else:
                pol = train_q_policy(env, goal, self.config.q_config(inst, tseed))
            self._cache[key] = pol
        return self._cache[key]

    def policies(self, inst, learner, seed) -> dict:
        return {g.id: self.get(inst, learner, seed, g) for g in inst.goals}

    def put(self, inst_name, learner, seed, goal_id, policy):
        self._cache[(inst_name, learner, seed, goal_id)] = policy


def observed_trajectory(config, inst, seed: int, store: PolicyStore):
    """The full observed-agent trajectory for one (instance, seed) problem."""
    env = inst.make_env()
    idx = config.seeds.index(seed) if seed in config.seeds else seed
    goal = inst.goals[idx % len(inst.goals)]
    traj_seed = stable_hash(f"{config.master_seed}/{inst.name}/traj/{seed}") & 0x7FFFFFFF
    obs_cfg = config.observer
    if obs_cfg.get("kind", "scripted") == "ppo":
        # independently seeded learner, distinct from the recognizer's policies
        pol = store.get(inst, "ppo", f"observer-{seed}", goal)
        agent = PolicyAgent(pol, deterministic=False)
    else:
        agent = scripted_agent(env, goal, float(obs_cfg.get("jitter", 0.0)))
    return goal, generate_trajectory(env, goal, agent, traj_seed)


def run_experiment(config, store: PolicyStore | None = None) -> ResultsTable:
    """Sweep every (instance, metric, observability, noise, seed) cell.

    All metrics score the same degraded trajectories.  Errors are re-raised
    with the failing cell's coordinates.
    """
    from .config import parse_metric

    store = store or PolicyStore(config)
    table = ResultsTable()
    metrics = [(m, *parse_metric(m, config.learner)) for m in config.metrics]
    for inst in config.instances:
        env = inst.make_env()
        for seed in config.seeds:
            true_goal, full = observed_trajectory(config, inst, seed, store)
            for noise in config.noise:
                for obs_pct in config.observability:
                    dseed = stable_hash(f"{config.master_seed}/{inst.name}/degrade/{seed}/{obs_pct}/{noise}") & 0x7FFFFFFF
                    coords = dict(instance=inst.name, observability=obs_pct, noise=noise, seed=seed)
                    try:
                        degraded = DegradeSpec(obs_pct, noise, dseed).apply(full, env)
                    except GoalRecError as exc:
                        raise GoalRecError(f"{coords}: {exc}") from exc
                    for label, learner, kind in metrics:
                        try:
                            policies = store.policies(inst, learner, seed)
                            obs = state_only_projection(degraded) if kind is MetricKind.STATE_ONLY else degraded
                            problem = GRProblem(inst.name, tuple(inst.goals), obs, true_goal.id)
                            result = recognize(problem, policies, kind, config.metric_cfg(dseed))
                        except GoalRecError as exc:
                            raise GoalRecError(f"{dict(coords, metric=label)}: {exc}") from exc
                        row = dict(coords, metric=label, true_goal=true_goal.id, predicted=result.predicted,
                                   observed_steps=len(obs), **_score_row(result, true_goal.id))
                        table.rows.append(row)
            log.info("instance %s seed %s done", inst.name, seed)
    return table
