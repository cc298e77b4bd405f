"""
Continuous reaching with noisy observations
===========================================

The same pipeline on a point mass moving in the unit cube.  A share of
the observed actions is replaced by random ones before recognition.
"""
from goalrec.config import preset
from goalrec.core import GRProblem
from goalrec.obsgen import DegradeSpec, LineAgent, generate_trajectory
from goalrec.ppo import PpoConfig, train_goal_policy
from goalrec.recognize import recognize

inst = preset("reach-3goal")
env = inst.make_env()
cfg = PpoConfig(total_steps=50_000, lr_actor=6e-4, lr_critic=6e-4)
policies = {g.id: train_goal_policy(env, g, cfg) for g in inst.goals}

goal = inst.goals[2]
full = generate_trajectory(env, goal, LineAgent(env, goal, jitter=0.1), seed=4)

for noise in (0, 10, 20):
    obs = DegradeSpec(observability_pct=50, noise_pct=noise, seed=5).apply(full, env)
    res = recognize(GRProblem(env.env_id, tuple(inst.goals), obs), policies, "wasserstein")
    print(f"noise {noise:>2}%: predicted {res.predicted} (true {goal.id}), confidence {res.confidence:.2f}")
