"""
How ambiguous is a layout, and how big do the tables get?
=========================================================

Worst-case distinctiveness counts how long an optimal agent can keep its
goal hidden.  The second half compares stored policy sizes: a network
has a fixed parameter count while a Q-table keeps gaining rows.
"""
from goalrec import io as gio
from goalrec.config import preset
from goalrec.evalkit import wcd_discrete
from goalrec.ppo import PpoConfig, train_goal_policy
from goalrec.tabular import QConfig, train_q_policy

for name in ("grid-2goal", "grid-3goal", "grid-lava"):
    inst = preset(name)
    rep = wcd_discrete(inst.make_env().spec, inst.goals)
    print(f"{name:<11} wcd={rep.wcd} plan lengths={rep.optimal_plan_length}")

inst = preset("reach-3goal")
env, goal = inst.make_env(), inst.goals[0]
for budget in (2_000, 10_000):
    net = train_goal_policy(env, goal, PpoConfig(total_steps=budget))
    table = train_q_policy(env, goal, QConfig(episodes=budget // 10))
    print(f"budget {budget:>6}: network file {len(gio.policy_text(net, env))} bytes, "
          f"q-table {len(table.table)} rows / {len(gio.policy_text(table, env))} bytes")
