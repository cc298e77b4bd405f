"""Versioned JSON persistence for policies, trajectories, configs and results.

Floats are written with Python's shortest round-trip ``repr`` so a
save/load cycle reproduces every value exactly.  All writes go through a
temporary file in the destination directory followed by ``os.replace``.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import GoalRecError, GoalSpec, ObservationSequence, ObservationStep
from .envs import make_env, spec_from_dict
from .evalkit import ResultsTable

FORMAT_VERSION = 1


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def atomic_write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise GoalRecError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None


def _check_version(d, path):
    v = d.get("format_version")
    if v != FORMAT_VERSION:
        raise GoalRecError(f"{path}: unsupported format_version {v!r}")


# -- policies --------------------------------------------------------------


def policy_to_dict(policy, env) -> dict:
    return {"format_version": FORMAT_VERSION, "env_id": env.env_id, "env": env.to_dict(), **policy.to_dict()}


def policy_from_dict(d: dict):
    from .ppo import ActorCriticPolicy
    from .tabular import QTablePolicy

    body = {k: v for k, v in d.items() if k not in ("format_version", "env_id", "env")}
    backend = body.get("backend")
    if backend == "mlp_ac":
        return ActorCriticPolicy.from_dict(body)
    if backend == "qtable":
        return QTablePolicy.from_dict(body)
    raise GoalRecError(f"unknown policy backend {backend!r}")


def policy_text(policy, env) -> str:
    return _dumps(policy_to_dict(policy, env)) + "\n"


def save_policy(path, policy, env):
    atomic_write_text(path, policy_text(policy, env))


def load_policy(path):
    d = _read_json(path)
    _check_version(d, path)
    return policy_from_dict(d)


def policy_filename(goal_id: str) -> str:
    return f"policy_{goal_id}.json"


def load_policies(directory, goal_ids) -> dict:
    out = {}
    for gid in goal_ids:
        p = Path(directory) / policy_filename(gid)
        if not p.exists():
            raise GoalRecError(f"missing policy for goal {gid!r} ({p})")
        out[gid] = load_policy(p)
    return out


# -- trajectories ----------------------------------------------------------


def _action_json(action):
    if action is None:
        return None
    if isinstance(action, (int, np.integer)):
        return int(action)
    return [float(v) for v in np.asarray(action).reshape(-1)]


def trajectory_text(obs: ObservationSequence, env_id: str, goals, true_goal=None, env=None) -> str:
    header = {
        "format_version": FORMAT_VERSION,
        "env_id": env_id,
        "goals": [g.to_dict() for g in goals],
        "true_goal": true_goal,
        "horizon": obs.horizon,
        "meta": obs.meta,
    }
    if env is not None:
        header["env"] = env.to_dict()
    lines = [_dumps(header)]
    for st in obs.steps:
        lines.append(_dumps({"t": st.t, "state": [float(v) for v in st.state], "action": _action_json(st.action)}))
    return "\n".join(lines) + "\n"


def save_trajectory(path, obs, env_id, goals, true_goal=None, env=None):
    atomic_write_text(path, trajectory_text(obs, env_id, goals, true_goal, env))


def load_trajectory(path):
    """Returns ``(header, ObservationSequence, goals)``."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().split("\n") if ln.strip()]
    if not lines:
        raise GoalRecError(f"{path}: empty trajectory file")
    rows = []
    for i, ln in enumerate(lines, 1):
        try:
            rows.append(json.loads(ln))
        except json.JSONDecodeError as exc:
            raise GoalRecError(f"{path}:{i}: invalid JSON ({exc.msg})") from None
    header = rows[0]
    _check_version(header, path)
    goals = [GoalSpec.from_dict(g) for g in header["goals"]]
    steps = []
    for i, row in enumerate(rows[1:], 2):
        try:
            a = row.get("action")
            steps.append(ObservationStep(int(row["t"]), row["state"], a if not isinstance(a, list) else np.array(a, dtype=float)))
        except (KeyError, TypeError, GoalRecError) as exc:
            raise GoalRecError(f"{path}:{i}: bad step ({exc})") from None
    try:
        obs = ObservationSequence(tuple(steps), int(header["horizon"]), dict(header.get("meta") or {}))
    except GoalRecError as exc:
        raise GoalRecError(f"{path}: {exc}") from None
    return header, obs, goals


def env_from_header(header):
    if "env" not in header:
        raise GoalRecError("trajectory header carries no environment spec")
    return make_env(spec_from_dict(header["env"]))


# -- configs and results -----------------------------------------------------


def load_config_dict(path) -> dict:
    d = _read_json(path)
    if not isinstance(d, dict):
        raise GoalRecError(f"{path}: config must be a JSON object")
    if "format_version" in d:
        _check_version(d, path)
    return d


def save_results(directory, table: ResultsTable, config_dict: dict | None = None):
    directory = Path(directory)
    payload = {"format_version": FORMAT_VERSION, **table.to_json_dict()}
    if config_dict is not None:
        payload["config"] = config_dict
    csv_text = table.to_csv()
    json_text = _dumps(payload) + "\n"
    atomic_write_text(directory / "results.csv", csv_text)
    atomic_write_text(directory / "results.json", json_text)


def load_results(path) -> ResultsTable:
    d = _read_json(path)
    _check_version(d, path)
    return ResultsTable.from_json_dict(d)


def dumps(obj) -> str:
    return _dumps(obj)
