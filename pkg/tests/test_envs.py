import numpy as np
import pytest

from goalrec.core import GoalRecError
from goalrec.envs import (
    EAST, FORWARD, NOOP, NORTH, SOUTH, TURN_LEFT, TURN_RIGHT, WEST, GridWorld, GridWorldSpec, PointReach,
    PointReachSpec, bfs_distances, enumerate_states, featurize, gridworld_step, make_env, pointreach_step,
    reward_l1, spec_from_dict,
)

from conftest import goal


def test_grid_turns_and_forward():
    spec = GridWorldSpec(4, 4, start=(1, 1, NORTH))
    s = (1, 1, NORTH)
    assert tuple(gridworld_step(spec, s, TURN_LEFT).next_state) == (1, 1, WEST)
    assert tuple(gridworld_step(spec, s, TURN_RIGHT).next_state) == (1, 1, EAST)
    assert tuple(gridworld_step(spec, s, FORWARD).next_state) == (1, 0, NORTH)
    assert tuple(gridworld_step(spec, (1, 1, SOUTH), FORWARD).next_state) == (1, 2, SOUTH)
    assert tuple(gridworld_step(spec, s, NOOP).next_state) == s


def test_grid_walls_and_bounds_block_motion():
    spec = GridWorldSpec(3, 3, start=(0, 0, EAST), walls=[(1, 0)])
    assert tuple(gridworld_step(spec, (0, 0, EAST), FORWARD).next_state) == (0, 0, EAST)
    assert tuple(gridworld_step(spec, (0, 0, NORTH), FORWARD).next_state) == (0, 0, NORTH)


def test_grid_lava_terminal_penalty():
    env = GridWorld(GridWorldSpec(3, 3, start=(0, 0, EAST), lava=[(1, 0)]))
    g = goal("g", 2, 2)
    out = env.transition((0, 0, EAST), FORWARD, g)
    assert out.terminal and out.terminal_reason == "lava"
    # -L1((1,0),(2,2)) - (w + h)
    assert env.reward(out, g) == pytest.approx(-3.0 - 6.0)


def test_grid_goal_and_horizon(grid5):
    g = goal("g", 1, 4)
    out = grid5.transition((0, 4, EAST), FORWARD, g, t=0)
    assert out.terminal_reason == "goal_reached"
    out = grid5.transition((0, 4, NORTH), TURN_LEFT, g, t=grid5.max_steps - 1)
    assert out.terminal_reason == "horizon"


def test_grid_malformed_inputs():
    spec = GridWorldSpec(3, 3)
    with pytest.raises(GoalRecError):
        gridworld_step(spec, (0.5, 0, 0), FORWARD)
    with pytest.raises(GoalRecError):
        gridworld_step(spec, (0, 0, 0), 7)
    with pytest.raises(GoalRecError):
        GridWorldSpec(3, 3, start=(0, 0, 0), walls=[(0, 0)])
    with pytest.raises(GoalRecError):
        GridWorldSpec(3, 3, walls=[(1, 1)], lava=[(1, 1)])


def test_pointreach_dynamics_and_clamp():
    spec = PointReachSpec(dim=2)
    out = pointreach_step(spec, [0.5, 0.5], [0.01, -0.02])
    np.testing.assert_allclose(out.next_state, [0.51, 0.48])
    assert not out.clamped
    out = pointreach_step(spec, [0.99, 0.5], [0.5, 0.0])
    assert out.clamped
    np.testing.assert_allclose(out.next_state, [1.0, 0.5])
    with pytest.raises(GoalRecError):
        pointreach_step(spec, [0.5, 0.5], [0.1, 0.1, 0.1])


def test_pointreach_goal_tolerance_and_fallback_radius(reach2):
    g = goal("g", 0.54, 0.2)
    assert reach2.transition([0.5, 0.2], [0.0, 0.0], g).terminal_reason == "goal_reached"
    g_tight = goal("g", 0.55, 0.2, tol=0.01)
    assert not reach2.transition([0.5, 0.2], [0.0, 0.0], g_tight).terminal
    assert reach2.transition([0.5, 0.2], [0.05, 0.0], g_tight).terminal_reason == "goal_reached"


def test_reward_l1():
    g = goal("g", 0.0, 0.0)
    assert reward_l1([0.25, -0.5], g) == pytest.approx(-0.75)
    assert reward_l1([3, 4, 2], g, position_dims=2) == -7.0
    with pytest.raises(GoalRecError):
        reward_l1([1, 2, 3], g)


def test_enumerate_states_order_and_walls():
    spec = GridWorldSpec(2, 2, walls=[(1, 1)])
    states = [tuple(int(v) for v in s) for s in enumerate_states(spec)]
    assert len(states) == 12
    assert states[:5] == [(0, 0, 0), (0, 0, 1), (0, 0, 2), (0, 0, 3), (1, 0, 0)]
    with pytest.raises(GoalRecError, match="not enumerable"):
        enumerate_states(PointReachSpec())


def test_bfs_distances_open_grid():
    spec = GridWorldSpec(5, 5)
    d = bfs_distances(spec, goal("g", 4, 4))
    # from (0,0) facing east: 4 forward, turn, 4 forward
    assert d[(0, 0, EAST)] == 9
    assert d[(4, 4, NORTH)] == 0
    assert d[(4, 3, SOUTH)] == 1


def test_bfs_unreachable_goal_behind_lava():
    spec = GridWorldSpec(3, 1, start=(0, 0, EAST), lava=[(1, 0)])
    assert (0, 0, EAST) not in bfs_distances(spec, goal("g", 2, 0))


def test_featurize_ranges():
    f = featurize({"kind": "grid", "width": 5, "height": 5}, [[0, 0, 0], [4, 4, 3]])
    np.testing.assert_allclose(f[0], [-1, -1, 1, 0, 0, 0])
    np.testing.assert_allclose(f[1], [1, 1, 0, 0, 0, 1])
    np.testing.assert_allclose(featurize({"kind": "box", "dim": 2}, [0.5, 1.0]), [[0.0, 1.0]])


def test_spec_round_trip():
    for spec in (GridWorldSpec(4, 3, start=(1, 2, 2), walls=[(0, 0)], lava=[(3, 2)], name="x"),
                 PointReachSpec(dim=3, start=(0.1, 0.2, 0.3), start_noise=0.05)):
        assert spec_from_dict(spec.to_dict()) == spec
        assert make_env(spec.to_dict()).to_dict() == spec.to_dict()


def test_reset_noise_is_seeded():
    env = PointReach(PointReachSpec(dim=2, start_noise=0.05))
    a = env.reset(np.random.default_rng(3))
    b = env.reset(np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)
    assert np.max(np.abs(a - 0.5)) <= 0.05


def test_step_actions_cover_directions():
    env = PointReach(PointReachSpec(dim=3))
    acts = env.step_actions()
    assert len(acts) == 26
    assert all(np.max(np.abs(a)) == pytest.approx(0.05) for a in acts)
