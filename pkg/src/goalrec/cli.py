"""``goalrec`` command line: train, observe, degrade, recognize, evaluate, wcd.

Exit codes: 0 success, 1 usage error, 2 runtime failure.  The log level
is read from the ``DRACO_LOG`` environment variable (default WARNING).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import io as gio
from .config import LEARNERS, PRESETS, ExperimentConfig, parse_metric, preset
from .core import GoalRecError, GRProblem
from .evalkit import PolicyStore, run_experiment, wcd_continuous_approx, wcd_discrete
from .obsgen import DegradeSpec, LineAgent, PolicyAgent, generate_trajectory, scripted_agent
from .recognize import MetricConfig, MetricKind, recognize

log = logging.getLogger("goalrec")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _pct_list(text):
    try:
        return [float(v) if "." in v else int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_source(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--config", help="experiment config JSON file")
    g.add_argument("--preset", choices=sorted(PRESETS), help="built-in instance")
    p.add_argument("--instance", help="instance name within the config (default: first)")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="goalrec", description="Goal recognition from learned goal-conditioned policies.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one policy per goal")
    _add_source(p)
    p.add_argument("--goal", help="train only this goal")
    p.add_argument("--learner", choices=LEARNERS, help="override the config learner")
    p.add_argument("--out", required=True, help="output directory for policy files")

    p = sub.add_parser("observe", help="generate an observed-agent trajectory")
    _add_source(p)
    p.add_argument("--goal", required=True)
    p.add_argument("--policies", help="drive the agent with a trained policy from this directory")
    p.add_argument("--out", required=True, help="trajectory JSONL path")

    p = sub.add_parser("degrade", help="drop steps and inject action noise")
    p.add_argument("trajectory")
    p.add_argument("--observability", type=float, default=100.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("recognize", help="rank goals for a trajectory; prints JSON")
    p.add_argument("--policies", required=True, help="directory of policy_<goal>.json files")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--metric", default="wasserstein")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mc-samples", type=int, default=32)
    p.add_argument("--beta", type=float, default=1.0)

    p = sub.add_parser("evaluate", help="run the experiment grid; writes results.csv and results.json")
    _add_source(p)
    p.add_argument("--metric", action="append", help="learner:metric, repeatable")
    p.add_argument("--observability", type=_pct_list)
    p.add_argument("--noise", type=_pct_list)
    p.add_argument("--seeds", type=int, help="number of problem seeds")
    p.add_argument("--out", required=True)

    p = sub.add_parser("wcd", help="worst-case distinctiveness; prints JSON")
    _add_source(p)
    p.add_argument("--delta", type=float, default=0.01, help="state equality radius (continuous)")
    p.add_argument("--samples", type=int, default=10, help="trajectories per goal (continuous)")
    p.add_argument("--jitter", type=float, default=0.1, help="observer noise for sampled trajectories")
    return parser


def _load_config(args) -> ExperimentConfig:
    if args.config:
        d = gio.load_config_dict(args.config)
    else:
        d = {"instances": [preset(args.preset).to_dict()], "name": args.preset}
    if args.seed is not None:
        d["master_seed"] = args.seed
    return ExperimentConfig.from_dict(d)


def _emit(obj):
    sys.stdout.write(gio.dumps(obj) + "\n")


# -- commands ----------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = _load_config(args)
    if args.learner:
        cfg.learner = args.learner
    inst = cfg.instance(args.instance)
    goals = [inst.goal(args.goal)] if args.goal else inst.goals
    store = PolicyStore(cfg)
    env = inst.make_env()
    # train everything before writing anything
    texts = []
    for g in goals:
        log.info("training %s policy for goal %s", cfg.learner, g.id)
        pol = store.get(inst, cfg.learner, 0, g)
        texts.append((Path(args.out) / gio.policy_filename(g.id), gio.policy_text(pol, env)))
    for path, text in texts:
        gio.atomic_write_text(path, text)
        print(path)
    return EXIT_OK


def cmd_observe(args) -> int:
    cfg = _load_config(args)
    inst = cfg.instance(args.instance)
    env = inst.make_env()
    goal = inst.goal(args.goal)
    if args.policies:
        agent = PolicyAgent(gio.load_policies(args.policies, [goal.id])[goal.id], deterministic=False)
    else:
        agent = scripted_agent(env, goal, float(cfg.observer.get("jitter", 0.0)))
    obs = generate_trajectory(env, goal, agent, cfg.master_seed)
    gio.save_trajectory(args.out, obs, env.env_id, inst.goals, goal.id, env)
    return EXIT_OK


def cmd_degrade(args) -> int:
    header, obs, goals = gio.load_trajectory(args.trajectory)
    env = gio.env_from_header(header) if args.noise or "env" in header else None
    degraded = DegradeSpec(args.observability, args.noise, args.seed).apply(obs, env)
    gio.save_trajectory(args.out, degraded, header["env_id"], goals, header.get("true_goal"), env)
    return EXIT_OK


def cmd_recognize(args) -> int:
    header, obs, goals = gio.load_trajectory(args.trajectory)
    policies = gio.load_policies(args.policies, [g.id for g in goals])
    if args.metric_kind is MetricKind.STATE_ONLY:
        from .obsgen import state_only_projection

        obs = state_only_projection(obs)
    problem = GRProblem(header["env_id"], tuple(goals), obs, header.get("true_goal"))
    cfg = MetricConfig(mc_samples=args.mc_samples, beta=args.beta, seed=args.seed)
    result = recognize(problem, policies, args.metric_kind, cfg)
    out = result.to_dict()
    out["metric"] = args.metric_kind.value
    if result.diagnostics:
        out["diagnostics"] = result.diagnostics
    _emit(out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    if args.metric:
        cfg.metrics = list(args.metric)
    if args.observability:
        cfg.observability = args.observability
    if args.noise:
        cfg.noise = args.noise
    if args.seeds:
        cfg.seeds = list(range(args.seeds))
    cfg = ExperimentConfig.from_dict(cfg.to_dict())
    table = run_experiment(cfg)
    gio.save_results(args.out, table, cfg.to_dict())
    print(Path(args.out) / "results.csv")
    return EXIT_OK


def cmd_wcd(args) -> int:
    cfg = _load_config(args)
    inst = cfg.instance(args.instance)
    env = inst.make_env()
    if env.kind == "gridworld":
        report = wcd_discrete(env.spec, inst.goals)
    else:
        trajs = {}
        for g in inst.goals:
            agent = LineAgent(env, g, args.jitter)
            trajs[g.id] = [
                [st.state for st in generate_trajectory(env, g, agent, cfg.master_seed * 1000 + i).steps]
                for i in range(args.samples)
            ]
        report = wcd_continuous_approx(trajs, args.delta)
    _emit({"instance": inst.name, **report.to_dict()})
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "observe": cmd_observe,
    "degrade": cmd_degrade,
    "recognize": cmd_recognize,
    "evaluate": cmd_evaluate,
    "wcd": cmd_wcd,
}


def main(argv=None) -> int:
    level = getattr(logging, os.environ.get("DRACO_LOG", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "recognize":
        try:
            args.metric_kind = parse_metric(args.metric)[1]
        except GoalRecError as exc:
            parser.print_usage(sys.stderr)
            print(f"goalrec: error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (GoalRecError, OSError, KeyError, ValueError) as exc:
        print(f"goalrec {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
