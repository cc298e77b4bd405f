"""
Recognizing a goal in a small gridworld
=======================================

Train one policy per candidate goal, watch an agent walk toward one of
them, hide most of its steps and ask which goal it was heading for.
"""
import numpy as np

from goalrec.config import preset
from goalrec.core import GRProblem
from goalrec.obsgen import degrade_observability, generate_trajectory
from goalrec.ppo import PpoConfig, train_goal_policy
from goalrec.recognize import MetricConfig, recognize

# a 7x7 room; the agent starts at the bottom middle facing north
inst = preset("grid-2goal")
env = inst.make_env()
print("goals:", {g.id: g.target.tolist() for g in inst.goals})

# one actor-critic per goal, trained on the negative L1 distance reward
policies = {g.id: train_goal_policy(env, g, PpoConfig(total_steps=20_000, seed=i)) for i, g in enumerate(inst.goals)}

# the observed agent walks an optimal path to the right-hand corner
true_goal = inst.goals[1]
full = generate_trajectory(env, true_goal, seed=0)
print("trajectory length:", len(full))

for pct in (10, 30, 50, 100):
    obs = degrade_observability(full, pct, seed=1)
    problem = GRProblem(env.env_id, tuple(inst.goals), obs, true_goal.id)
    for metric in ("wasserstein", "zscore"):
        res = recognize(problem, policies, metric, MetricConfig(seed=2))
        post = np.round([res.posterior[g.id] for g in inst.goals], 3)
        print(f"{pct:>3}% observed, {metric:<11} -> {res.predicted}  posterior {post}  confidence {res.confidence:.2f}")
