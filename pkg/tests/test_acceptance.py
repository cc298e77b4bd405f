"""Acceptance criteria, one test per criterion.

Each test records a single PASS/FAIL line; the lines are printed in the
pytest terminal summary, or directly when this file is run as a script:

    python tests/test_acceptance.py
"""
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from goalrec import io as gio  # noqa: E402
from goalrec.cli import main as cli_main  # noqa: E402
from goalrec.config import TABULAR_DEFAULTS, ExperimentConfig, preset  # noqa: E402
from goalrec.evalkit import run_experiment  # noqa: E402
from goalrec.ppo import PpoConfig, train_goal_policy  # noqa: E402
from goalrec.tabular import QConfig, train_q_policy  # noqa: E402

pytestmark = pytest.mark.slow

REPORT = []
SEEDS = 10


def record(name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    REPORT.append(line)
    print(line, flush=True)
    return ok


_cache = {}


def _experiment(key, **kw):
    if key not in _cache:
        t0 = time.process_time()
        cfg = ExperimentConfig.from_dict({"seeds": SEEDS, **kw})
        _cache[key] = (run_experiment(cfg), time.process_time() - t0)
    return _cache[key]


def grid_table():
    return _experiment(
        "grid", instances=[preset("grid-2goal").to_dict()],
        metrics=["ppo:wasserstein", "ppo:zscore", "tabular:kl"], observability=[30, 50, 70, 100],
    )


def reach3_table():
    return _experiment(
        "reach3", instances=[preset("reach-3goal").to_dict()],
        metrics=["ppo:wasserstein", "ppo:zscore", "tabular:mean_action"], observability=[10, 20, 30, 100],
    )


def reach2_noise_table():
    return _experiment(
        "reach2", instances=[preset("reach-2goal").to_dict()], metrics=["ppo:wasserstein"],
        observability=[100], noise=[0, 10, 20],
    )


def test_c1_high_observability_perfection():
    table, cpu = grid_table()
    parts, ok = [], cpu <= 600
    for metric in ("ppo:wasserstein", "ppo:zscore"):
        for obs in (50, 70, 100):
            f = table.mean("f_score", metric=metric, observability=obs)
            acc = table.mean("accuracy", metric=metric, observability=obs)
            ok &= f >= 0.9 and acc >= 0.9
            parts.append(f"{metric.split(':')[1]}@{obs}% F={f:.3f} acc={acc:.3f}")
    assert record("C1 grid 2-goal F>=0.9 and acc>=0.9 at obs>=50%", ok, "; ".join(parts) + f"; cpu {cpu:.0f}s (<=600s)")


def test_c2_confidence_dominance():
    table, _ = grid_table()
    policy = table.mean("confidence", metric="ppo:wasserstein", observability=30)
    zs = table.mean("confidence", metric="ppo:zscore", observability=30)
    tabular = table.mean("confidence", metric="tabular:kl", observability=30)
    ok = policy >= tabular + 0.15
    assert record("C2 confidence at 30% obs, PPO-Wasserstein >= tabular-KL + 0.15", ok,
                  f"wasserstein {policy:.3f}, zscore {zs:.3f}, tabular {tabular:.3f}, margin {policy - tabular:.3f}")


def test_c3_continuous_superiority():
    table, cpu = reach3_table()
    w = table.mean("f_score", metric="ppo:wasserstein", observability=100)
    z = table.mean("f_score", metric="ppo:zscore", observability=100)
    q = table.mean("f_score", metric="tabular:mean_action", observability=100)
    ok = max(w, z) >= q + 0.2 and cpu <= 1200
    assert record("C3 reach 3-goal F at 100% obs, PPO metric >= tabular + 0.2", ok,
                  f"wasserstein {w:.3f}, zscore {z:.3f}, tabular(0.03) {q:.3f}; cpu {cpu:.0f}s (<=1200s)")


def test_c4_noise_resilience():
    table, _ = reach2_noise_table()
    base = table.mean("f_score", noise=0)
    f10, f20 = table.mean("f_score", noise=10), table.mean("f_score", noise=20)
    ok = abs(f10 - base) <= 0.1 and abs(f20 - base) <= 0.1
    assert record("C4 reach 2-goal Wasserstein F within 0.1 of noiseless", ok,
                  f"0% {base:.3f}, 10% {f10:.3f}, 20% {f20:.3f}")


def test_c5_wasserstein_vs_zscore_low_observability():
    table, _ = reach3_table()
    ok, parts = True, []
    for obs in (10, 20, 30):
        w = table.mean("f_score", metric="ppo:wasserstein", observability=obs)
        z = table.mean("f_score", metric="ppo:zscore", observability=obs)
        ok &= w >= z - 0.05
        parts.append(f"{obs}%: W={w:.3f} Z={z:.3f}")
    assert record("C5 reach 3-goal Wasserstein >= Z-score - 0.05 at 10-30% obs", ok, "; ".join(parts))


def test_c6_storage_scaling():
    parts, ok = [], True
    for name in ("grid-2goal", "reach-3goal"):
        inst = preset(name)
        env, g = inst.make_env(), inst.goals[0]
        sizes = []
        for steps in (5_000, 20_000, 50_000):
            cfg = ExperimentConfig.from_dict({"instances": [inst.to_dict()]}).ppo_config(inst, 0)
            cfg = PpoConfig.from_dict({**cfg.to_dict(), "total_steps": steps})
            sizes.append(len(gio.policy_text(train_goal_policy(env, g, cfg), env).encode()))
        spread = (max(sizes) - min(sizes)) / min(sizes)
        ok &= spread <= 0.01
        parts.append(f"{name} policy bytes {sizes} spread {spread:.4%}")
    inst = preset("reach-3goal")
    env, g = inst.make_env(), inst.goals[0]
    qsizes, rows = [], []
    for episodes in (5_000, 20_000, 50_000):
        pol = train_q_policy(env, g, QConfig(**{**TABULAR_DEFAULTS["pointreach"], "episodes": episodes}))
        qsizes.append(len(gio.policy_text(pol, env).encode()))
        rows.append(len(pol.table))
    growth = qsizes[-1] / qsizes[0] - 1
    ok &= qsizes == sorted(qsizes) and growth >= 0.10
    parts.append(f"qtable bytes {qsizes} rows {rows} growth {growth:.1%}")
    assert record("C6 fixed-size policy files, growing Q-tables", ok, "; ".join(parts))


def test_c7_oracle_suite():
    import test_core
    import test_evalkit
    import test_nn
    import test_recognize
    import test_tabular

    checks = {
        "a gradient check": lambda: test_nn.test_gradients_match_central_differences([4, 8, 8, 2]),
        "b Q vs value iteration": test_tabular.test_q_learning_matches_value_iteration_on_chain,
        "c WCD vs brute force": test_evalkit.test_wcd_matches_brute_force_on_random_grids,
        "d softmin normalization": test_core.test_softmin_normalization_random_inputs,
        "e half-normal": test_recognize.test_halfnormal_convergence,
        "f z-score of mean": test_recognize.test_zscore_examples,
        "g confusion arithmetic": test_evalkit.test_lava_arithmetic_reconstruction,
    }
    failed = []
    for name, fn in checks.items():
        try:
            fn()
        except AssertionError:
            failed.append(name)
    assert record("C7 oracle/property suite", not failed,
                  f"{len(checks) - len(failed)}/{len(checks)} passed" + (f"; failed {failed}" if failed else ""))


def _cli(*argv):
    code = cli_main([str(a) for a in argv])
    if code != 0:
        raise AssertionError(f"command {argv[0]} exited {code}")


def _snapshot(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(Path(root).rglob("*")) if p.is_file()}


def test_c8_determinism(capsys):
    cfg = {
        "instances": [preset("grid-2goal").to_dict(), preset("reach2d-2goal").to_dict()],
        "metrics": ["ppo:wasserstein", "ppo:zscore", "tabular:mean_action"],
        "ppo": {"total_steps": 4096, "rollout_steps": 1024},
        "tabular": {"episodes": 200},
        "observability": [30, 100], "noise": [0, 10], "seeds": 2, "master_seed": 7,
    }
    outputs = []
    for _ in range(2):
        with tempfile.TemporaryDirectory() as d:
            d = Path(d)
            (d / "cfg.json").write_text(json.dumps(cfg))
            printed = []
            for inst in ("grid-2goal", "reach2d-2goal"):
                for learner in ("ppo", "tabular"):
                    _cli("train", "--config", d / "cfg.json", "--instance", inst, "--learner", learner,
                         "--out", d / inst / learner)
                _cli("observe", "--config", d / "cfg.json", "--instance", inst, "--goal", "g2", "--out", d / inst / "t.jsonl")
                _cli("degrade", d / inst / "t.jsonl", "--observability", 50, "--noise", 10, "--seed", 3,
                     "--out", d / inst / "d.jsonl")
                capsys.readouterr()
                for metric in ("wasserstein", "zscore"):
                    _cli("recognize", "--policies", d / inst / "ppo", "--trajectory", d / inst / "d.jsonl", "--metric", metric)
                printed.append(capsys.readouterr().out)
            _cli("evaluate", "--config", d / "cfg.json", "--out", d / "results")
            capsys.readouterr()
            outputs.append((_snapshot(d), printed))
    same = outputs[0] == outputs[1]
    n_files = len(outputs[0][0])
    assert record("C8 byte-identical reruns of train/observe/degrade/recognize/evaluate", same,
                  f"{n_files} artifacts and {sum(p.count(chr(10)) for p in outputs[0][1])} recognize outputs compared")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
