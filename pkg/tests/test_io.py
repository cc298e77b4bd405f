import json

import numpy as np
import pytest

from goalrec import io as gio
from goalrec.config import ExperimentConfig, preset
from goalrec.core import GoalRecError
from goalrec.evalkit import run_experiment
from goalrec.obsgen import generate_trajectory
from goalrec.ppo import PpoConfig, train_goal_policy
from goalrec.tabular import QConfig, train_q_policy


def test_policy_files_round_trip_exactly(tmp_path):
    inst = preset("reach2d-2goal")
    env = inst.make_env()
    g = inst.goals[0]
    for pol in (train_goal_policy(env, g, PpoConfig(total_steps=256, rollout_steps=128, hidden=(8,))),
                train_q_policy(env, g, QConfig(episodes=10))):
        path = tmp_path / f"{pol.backend}.json"
        gio.save_policy(path, pol, env)
        back = gio.load_policy(path)
        assert back.to_dict() == pol.to_dict()
        assert gio.policy_text(back, env) == path.read_text()
        d = json.loads(path.read_text())
        assert d["format_version"] == gio.FORMAT_VERSION and d["env_id"] == env.env_id


def test_trajectory_round_trip(tmp_path):
    for name in ("grid-2goal", "reach-2goal"):
        inst = preset(name)
        env = inst.make_env()
        obs = generate_trajectory(env, inst.goals[1], seed=3)
        path = tmp_path / f"{name}.jsonl"
        gio.save_trajectory(path, obs, env.env_id, inst.goals, "g2", env)
        header, back, goals = gio.load_trajectory(path)
        assert back == obs and back.horizon == obs.horizon
        assert [g.to_dict() for g in goals] == [g.to_dict() for g in inst.goals]
        assert header["true_goal"] == "g2"
        assert len(path.read_text().strip().split("\n")) == len(obs) + 1


def test_trajectory_bad_line_reports_location(tmp_path):
    p = tmp_path / "t.jsonl"
    p.write_text('{"format_version": 1, "env_id": "e", "goals": [], "horizon": 3}\n{"t": 0, "state": [0]}\nnot json\n')
    with pytest.raises(GoalRecError, match=r"t.jsonl:3"):
        gio.load_trajectory(p)
    p.write_text('{"format_version": 99, "env_id": "e", "goals": [], "horizon": 3}\n')
    with pytest.raises(GoalRecError, match="format_version"):
        gio.load_trajectory(p)


def test_results_round_trip(tmp_path):
    cfg = ExperimentConfig.from_dict({"instances": [preset("grid-2goal").to_dict()], "metrics": ["tabular:kl"],
                                      "tabular": {"episodes": 20}, "observability": [50], "seeds": 2})
    table = run_experiment(cfg)
    gio.save_results(tmp_path, table, cfg.to_dict())
    back = gio.load_results(tmp_path / "results.json")
    assert back.rows == table.rows
    assert (tmp_path / "results.csv").read_text() == table.to_csv()


def test_atomic_write_leaves_no_temp_files(tmp_path):
    gio.atomic_write_text(tmp_path / "a" / "x.txt", "hello")
    assert [p.name for p in (tmp_path / "a").iterdir()] == ["x.txt"]


def test_floats_survive_exactly(tmp_path):
    vals = [0.1, 1 / 3, 1e-300, -2.5e17, np.nextafter(1.0, 2.0)]
    p = tmp_path / "f.json"
    gio.atomic_write_text(p, gio.dumps({"v": [float(v) for v in vals]}))
    assert json.loads(p.read_text())["v"] == [float(v) for v in vals]
