import numpy as np
import pytest

from goalrec.core import Box, GoalRecError
from goalrec.envs import GridWorld, GridWorldSpec, PointReach, PointReachSpec, bfs_distances
from goalrec.tabular import Discretizer, QConfig, QTable, QTablePolicy, default_discretizer, q_update, train_q_policy

from conftest import goal


def _chain(s, a):
    # 5-state chain, action 0 left / 1 right, state 4 absorbing goal
    nxt = max(s - 1, 0) if a == 0 else min(s + 1, 4)
    return nxt, (0.0 if nxt == 4 else -1.0), nxt == 4


def _value_iteration(gamma, tol=1e-10):
    q = np.zeros((5, 2))
    while True:
        new = np.zeros_like(q)
        for s in range(4):
            for a in range(2):
                n, r, term = _chain(s, a)
                new[s, a] = r + (0.0 if term else gamma * q[n].max())
        if np.max(np.abs(new - q)) < tol:
            return new
        q = new


def test_q_learning_matches_value_iteration_on_chain():
    gamma = 0.9
    q_star = _value_iteration(gamma)
    table = QTable(2)
    rng = np.random.default_rng(0)
    for k in range(100_000):
        s, a = int(rng.integers(4)), int(rng.integers(2))
        n, r, term = _chain(s, a)
        alpha = 0.5 / (1.0 + k / 20_000)
        q_update(table, (s,), a, r, (n,), alpha, gamma, term)
    learned = np.array([table.get((s,)) for s in range(5)])
    assert np.max(np.abs(learned - q_star)) < 1e-3


def test_q_update_single_backup():
    t = QTable(3)
    t.values[(1,)] = np.array([0.0, 2.0, -1.0])
    q_update(t, (0,), 2, -1.0, (1,), 0.5, 0.9, False)
    assert t.get((0,))[2] == pytest.approx(0.5 * (-1.0 + 0.9 * 2.0))
    q_update(t, (0,), 0, -3.0, (1,), 1.0, 0.9, True)
    assert t.get((0,))[0] == -3.0
    assert t.visits[(0,)].tolist() == [1, 0, 1]
    with pytest.raises(GoalRecError):
        q_update(t, (0,), 0, 0.0, (1,), 0.0, 0.9, False)


def test_discretizer_bins():
    d = Discretizer(0.03)
    assert d.key([0.0, 0.029, 0.03]) == (0, 0, 1)
    assert d.key([0.06]) == (2,)
    assert Discretizer(1.0).key([3, 4, 2]) == (3, 4, 2)
    np.testing.assert_allclose(d.bin_center((1,)), [0.045])
    with pytest.raises(GoalRecError):
        Discretizer(0.0)


def _policy_from_rows(rows, actions=None, space=None):
    t = QTable(len(next(iter(rows.values()))))
    for k, v in rows.items():
        t.values[k] = np.asarray(v, dtype=float)
    from goalrec.core import Discrete

    space = space or Discrete(t.arity)
    return QTablePolicy(goal("g", 0, 0), space, Discretizer(1.0), t, actions)


def test_policy_probabilities_floor_and_value():
    pol = _policy_from_rows({(0, 0): [0.0, -20.0, -1.0]})
    p = pol.probs([0, 0])
    assert p.sum() == pytest.approx(1.0)
    assert p.min() >= 0.01 / (1 + 0.02)
    assert pol.value([0, 0]) == 0.0
    assert pol.greedy_actions([0, 0]) == [0]
    # unvisited state: all actions tie
    assert pol.greedy_actions([5, 5]) == [0, 1, 2]
    assert not pol.visited([5, 5])
    np.testing.assert_allclose(pol.probs([5, 5]), [1 / 3] * 3)


def test_grid_q_learning_finds_shortest_path():
    env = GridWorld(GridWorldSpec(5, 5, start=(0, 4, 1), max_steps=40))
    g = goal("corner", 4, 0)
    pol = train_q_policy(env, g, QConfig(episodes=600, alpha=0.5, gamma=0.99, seed=0))
    state, n = env.reset(), 0
    for t in range(env.max_steps):
        out = env.transition(state, pol.greedy_actions(state)[0], g, t)
        n += 1
        state = out.next_state
        if out.terminal:
            break
    assert out.terminal_reason == "goal_reached"
    assert n == bfs_distances(env.spec, g)[tuple(env.spec.start)]


def test_continuous_table_uses_step_set_and_grows():
    env = PointReach(PointReachSpec(dim=2, start=(0.5, 0.2)))
    g = goal("g", 0.5, 0.8)
    small = train_q_policy(env, g, QConfig(episodes=20, seed=1))
    big = train_q_policy(env, g, QConfig(episodes=200, seed=1))
    assert isinstance(small.action_space, Box) and small.table.arity == 8
    assert len(big.table) > len(small.table)
    a = small.greedy_actions([0.5, 0.2])[0]
    assert np.max(np.abs(a)) == pytest.approx(0.05)


def test_default_discretizer():
    assert default_discretizer(GridWorld(GridWorldSpec(3, 3)), 0.03).factor == 1.0
    assert default_discretizer(PointReach(PointReachSpec()), 0.03).factor == 0.03


def test_q_policy_round_trip_and_determinism():
    env = PointReach(PointReachSpec(dim=2, start=(0.5, 0.2)))
    g = goal("g", 0.3, 0.8)
    cfg = QConfig(episodes=30, seed=4)
    a, b = train_q_policy(env, g, cfg), train_q_policy(env, g, cfg)
    assert a.to_dict() == b.to_dict()
    back = QTablePolicy.from_dict(a.to_dict())
    assert back.to_dict() == a.to_dict()
    s = [0.51, 0.23]
    np.testing.assert_array_equal(back.probs(s), a.probs(s))


def test_qconfig_validation():
    with pytest.raises(GoalRecError):
        QConfig(alpha=0.0)
    with pytest.raises(GoalRecError):
        QConfig(factor=-1)
