import pytest

from goalrec.config import ExperimentConfig, parse_metric, preset
from goalrec.core import GoalRecError
from goalrec.evalkit import run_experiment
from goalrec.recognize import MetricKind

SMALL = {"total_steps": 1024, "rollout_steps": 512, "hidden": [16]}


def _cfg(**kw):
    base = dict(instances=[preset("grid-2goal").to_dict()], metrics=["ppo:wasserstein", "tabular:kl"],
                ppo=SMALL, tabular={"episodes": 50}, observability=[30, 100], seeds=3)
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def test_grid_arithmetic_and_determinism():
    cfg = _cfg()
    a = run_experiment(cfg)
    assert len(a.rows) == 2 * 2 * 3
    assert len(a.aggregates()) == 4
    b = run_experiment(_cfg())
    assert a.to_csv() == b.to_csv()
    assert a.to_json_dict() == b.to_json_dict()


def test_true_goal_rotation():
    rows = run_experiment(_cfg(metrics=["tabular:kl"], observability=[100])).rows
    assert [r["true_goal"] for r in rows] == ["g1", "g2", "g1"]


def test_master_seed_changes_results():
    a = run_experiment(_cfg(metrics=["ppo:zscore"], observability=[100], seeds=2))
    b = run_experiment(_cfg(metrics=["ppo:zscore"], observability=[100], seeds=2, master_seed=1))
    assert a.to_csv() != b.to_csv()


def test_errors_carry_cell_coordinates():
    cfg = _cfg(instances=[preset("reach2d-2goal").to_dict()], metrics=["tabular:kl"], seeds=1,
               tabular={"episodes": 5})
    with pytest.raises(GoalRecError, match="'observability': 30.*KL requires discrete"):
        run_experiment(cfg)


def test_config_validation():
    with pytest.raises(GoalRecError):
        _cfg(observability=[])
    with pytest.raises(GoalRecError):
        _cfg(metrics=["ppo:cosine"])
    with pytest.raises(GoalRecError):
        _cfg(ppo={"bogus": 1})
    with pytest.raises(GoalRecError):
        _cfg(noise=[120])
    with pytest.raises(GoalRecError):
        ExperimentConfig.from_dict({"instances": [{"name": "x", "env": {"type": "gridworld", "width": 3, "height": 3},
                                                   "goals": [{"id": "a", "target": [1, 1]}, {"id": "a", "target": [2, 2]}]}]})


def test_parse_metric():
    assert parse_metric("kl", "tabular") == ("tabular", MetricKind.KL)
    assert parse_metric("ppo:z-score") == ("ppo", MetricKind.ZSCORE)


def test_config_round_trip():
    cfg = _cfg()
    assert ExperimentConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()
