"""Goal-conditioned actor-critic policies trained with PPO-clip and GAE."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import Box, Categorical, DiagGaussian, DivergenceError, GoalPolicy, GoalRecError, GoalSpec, space_from_dict
from .envs import HORIZON, feature_dim, featurize
from .nn import AdamState, Mlp, adam_step, clip_grad_norm, log_softmax, mlp_backward, mlp_forward, softmax

log = logging.getLogger(__name__)

HALF_LOG_2PI_E = 0.5 * math.log(2 * math.pi * math.e)


@dataclass(frozen=True)
class PpoConfig:
    total_steps: int = 20_000
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    epochs: int = 10
    minibatch_size: int = 64
    rollout_steps: int = 2048
    lr_actor: float = 1e-3
    lr_critic: float = 1e-3
    entropy_coef: float = 0.01
    max_grad_norm: float = 0.5
    hidden: tuple = (64, 64)
    reward_scale: float | None = None  # None: 1 / (largest L1 distance in the env)
    log_std_init: float = math.log(0.5)  # in units of a_max
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.total_steps < 0 or self.rollout_steps < 1 or self.minibatch_size < 1 or self.epochs < 1:
            raise GoalRecError("invalid PPO step/batch sizes")
        if not (0 < self.gamma <= 1 and 0 <= self.gae_lambda <= 1 and self.clip_eps > 0):
            raise GoalRecError("invalid PPO gamma/lambda/clip")
        if self.lr_actor <= 0 or self.lr_critic <= 0 or self.entropy_coef < 0:
            raise GoalRecError("invalid PPO learning rates or entropy coefficient")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        out = asdict(self)
        out["hidden"] = list(self.hidden)
        return out


class ActorCriticPolicy(GoalPolicy):
    """Actor and critic MLPs for one goal.

    Continuous actors work in units of ``a_max``: the network mean and
    ``log_std`` describe a Gaussian over ``a / a_max`` and environment
    actions are the clipped samples rescaled.  The critic predicts scaled
    returns; :meth:`value` undoes the scale.
    """

    backend = "mlp_ac"

    def __init__(self, goal, action_space, feature_spec, actor, critic, log_std=None, reward_scale=1.0, metadata=None):
        self.goal = goal
        self.action_space = action_space
        self.feature_spec = dict(feature_spec)
        self.actor = actor
        self.critic = critic
        self.log_std = None if log_std is None else np.array(log_std, dtype=float)
        self.reward_scale = float(reward_scale)
        self.metadata = dict(metadata or {})
        self.continuous = isinstance(action_space, Box)
        self.action_scale = self.action_space.high_arr if self.continuous else None

    @classmethod
    def init(cls, goal, action_space, feature_spec, config: PpoConfig, reward_scale, rng):
        n_in = feature_dim(feature_spec)
        n_out = action_space.dim if isinstance(action_space, Box) else action_space.n
        actor = Mlp.init([n_in, *config.hidden, n_out], rng, out_gain=0.01)
        critic = Mlp.init([n_in, *config.hidden, 1], rng, out_gain=1.0)
        log_std = np.full(n_out, config.log_std_init) if isinstance(action_space, Box) else None
        return cls(goal, action_space, feature_spec, actor, critic, log_std, reward_scale)

    def copy(self):
        return ActorCriticPolicy(
            self.goal, self.action_space, self.feature_spec, self.actor.copy(), self.critic.copy(),
            None if self.log_std is None else self.log_std.copy(), self.reward_scale, self.metadata,
        )

    # -- evaluation -------------------------------------------------------

    def features(self, states):
        return featurize(self.feature_spec, states)

    def _std_internal(self):
        return np.exp(np.clip(self.log_std, math.log(1e-6), 2.0))

    def distribution(self, state):
        out = mlp_forward(self.actor, self.features(state)[0])
        if self.continuous:
            return DiagGaussian(out * self.action_scale, self._std_internal() * self.action_scale)
        return Categorical(softmax(out))

    def value(self, state) -> float:
        return float(mlp_forward(self.critic, self.features(state)[0])[0]) / self.reward_scale

    def values(self, states) -> np.ndarray:
        return mlp_forward(self.critic, self.features(states))[:, 0] / self.reward_scale

    def greedy_actions(self, state) -> list:
        out = mlp_forward(self.actor, self.features(state)[0])
        if self.continuous:
            return [np.clip(out, -1.0, 1.0) * self.action_scale]
        best = np.flatnonzero(out == out.max())
        return [int(i) for i in best]

    def act(self, state, rng, deterministic=False):
        """Return ``(env_action, raw_action, log_prob)`` for one state."""
        out = mlp_forward(self.actor, self.features(state)[0])
        if self.continuous:
            std = self._std_internal()
            u = out.copy() if deterministic else out + std * rng.standard_normal(out.shape)
            z = (u - out) / std
            logp = float(np.sum(-0.5 * z * z - np.log(std) - 0.5 * math.log(2 * math.pi)))
            return np.clip(u, -1.0, 1.0) * self.action_scale, u, logp
        lp = log_softmax(out)
        if deterministic:
            a = int(np.argmax(out))
        else:
            cdf = np.cumsum(np.exp(lp))
            a = int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), cdf.size - 1))
        return a, a, float(lp[a])

    # -- batched pieces used by the update --------------------------------

    def log_probs_and_grads(self, feats, raw_actions):
        """Per-row log-probabilities, entropies and their gradients w.r.t. actor outputs."""
        out, cache = mlp_forward(self.actor, feats, return_cache=True)
        n = out.shape[0]
        if self.continuous:
            log_std = np.clip(self.log_std, math.log(1e-6), 2.0)
            std = np.exp(log_std)
            z = (raw_actions - out) / std
            logp = np.sum(-0.5 * z * z - log_std - 0.5 * math.log(2 * math.pi), axis=1)
            d_logp_out = z / std
            d_logp_logstd = z * z - 1.0
            ent = np.full(n, float(np.sum(log_std + HALF_LOG_2PI_E)))
            d_ent_out = np.zeros_like(out)
            d_ent_logstd = np.ones_like(out)
            return logp, ent, d_logp_out, d_ent_out, d_logp_logstd, d_ent_logstd, cache
        lp = log_softmax(out)
        p = np.exp(lp)
        idx = np.asarray(raw_actions, dtype=int).reshape(-1)
        logp = lp[np.arange(n), idx]
        onehot = np.zeros_like(out)
        onehot[np.arange(n), idx] = 1.0
        d_logp_out = onehot - p
        ent = -np.sum(p * lp, axis=1)
        d_ent_out = -p * (lp + ent[:, None])
        return logp, ent, d_logp_out, d_ent_out, None, None, cache

    def actor_params(self):
        return self.actor.params + ([self.log_std] if self.continuous else [])

    def set_actor_params(self, params):
        if self.continuous:
            self.actor.set_params(params[:-1])
            self.log_std = np.array(params[-1])
        else:
            self.actor.set_params(params)

    # -- persistence ------------------------------------------------------

    def to_dict(self):
        def flat(net):
            return [float(v) for p in net.params for v in np.asarray(p).reshape(-1)]

        return {
            "backend": self.backend,
            "goal": self.goal.to_dict(),
            "action_space": self.action_space.to_dict(),
            "feature_spec": self.feature_spec,
            "actor": {"layer_sizes": self.actor.layer_sizes, "params": flat(self.actor)},
            "critic": {"layer_sizes": self.critic.layer_sizes, "params": flat(self.critic)},
            "log_std": None if self.log_std is None else [float(v) for v in self.log_std],
            "reward_scale": self.reward_scale,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d):
        def unflat(spec):
            sizes = spec["layer_sizes"]
            vals = np.asarray(spec["params"], dtype=float)
            weights, biases, pos = [], [], 0
            for i in range(len(sizes) - 1):
                n = sizes[i + 1] * sizes[i]
                weights.append(vals[pos:pos + n].reshape(sizes[i + 1], sizes[i]))
                pos += n
                biases.append(vals[pos:pos + sizes[i + 1]])
                pos += sizes[i + 1]
            if pos != vals.size:
                raise GoalRecError("parameter array length does not match layer sizes")
            return Mlp(sizes, weights, biases)

        return cls(
            GoalSpec.from_dict(d["goal"]), space_from_dict(d["action_space"]), d["feature_spec"],
            unflat(d["actor"]), unflat(d["critic"]), d.get("log_std"), d["reward_scale"], d.get("metadata"),
        )


# -- rollouts -------------------------------------------------------------


@dataclass
class RolloutBatch:
    states: np.ndarray
    features: np.ndarray
    raw_actions: np.ndarray
    env_actions: list
    rewards: np.ndarray
    logprobs: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    truncation_values: np.ndarray
    last_value: float = 0.0
    cursor: tuple = field(default=None, repr=False)
    episode_returns: list = field(default_factory=list)
    episode_lengths: list = field(default_factory=list)
    episode_outcomes: list = field(default_factory=list)

    def __len__(self):
        return len(self.rewards)


def collect_rollout(env, goal: GoalSpec, policy: ActorCriticPolicy, steps: int, rng, cursor=None) -> RolloutBatch:
    """Run ``policy`` for exactly ``steps`` transitions, resetting on termination.

    ``cursor`` (``(state, t, ep_return)``) continues an unfinished episode
    from a previous batch.
    """
    env.check_goal(goal)
    if cursor is None:
        state, t, ep_ret = env.reset(rng), 0, 0.0
    else:
        state, t, ep_ret = cursor
    states, raws, env_actions, rewards, logps, dones, trunc_idx, trunc_states = [], [], [], [], [], [], [], []
    ep_returns, ep_lengths, ep_outcomes = [], [], []
    for i in range(steps):
        a_env, a_raw, logp = policy.act(state, rng)
        out = env.transition(state, a_env, goal, t)
        r = env.reward(out, goal)
        states.append(state)
        raws.append(a_raw)
        env_actions.append(a_env)
        rewards.append(r)
        logps.append(logp)
        dones.append(out.terminal)
        ep_ret += r
        if out.terminal:
            if out.terminal_reason == HORIZON:
                trunc_idx.append(i)
                trunc_states.append(out.next_state)
            ep_returns.append(ep_ret)
            ep_lengths.append(t + 1)
            ep_outcomes.append(out.terminal_reason)
            state, t, ep_ret = env.reset(rng), 0, 0.0
        else:
            state, t = out.next_state, t + 1
    n = len(rewards)
    if n:
        st = np.array(states)
        values = policy.values(st)
        raw_arr = np.array(raws, dtype=float)
        if raw_arr.ndim == 1:
            raw_arr = raw_arr[:, None]
    else:
        st = np.zeros((0, env.state_dim))
        values = np.zeros(0)
        raw_arr = np.zeros((0, 1))
    trunc_vals = np.zeros(n)
    if trunc_idx:
        trunc_vals[trunc_idx] = policy.values(np.array(trunc_states))
    last_value = 0.0 if (n == 0 or dones[-1]) else policy.value(state)
    return RolloutBatch(
        states=st,
        features=policy.features(st) if n else np.zeros((0, feature_dim(policy.feature_spec))),
        raw_actions=raw_arr,
        env_actions=env_actions,
        rewards=np.array(rewards, dtype=float),
        logprobs=np.array(logps, dtype=float),
        values=values,
        dones=np.array(dones, dtype=bool),
        truncation_values=trunc_vals,
        last_value=last_value,
        cursor=(state, t, ep_ret),
        episode_returns=ep_returns,
        episode_lengths=ep_lengths,
        episode_outcomes=ep_outcomes,
    )


def gae_advantages(batch: RolloutBatch, gamma: float, lam: float):
    """Generalized advantage estimates and value targets (in reward units).

    Episodes cut by the horizon bootstrap from the value of the cut state.
    """
    n = len(batch)
    if n == 0:
        raise GoalRecError("empty batch")
    adv = np.zeros(n)
    next_adv = 0.0
    for t in range(n - 1, -1, -1):
        nonterminal = 0.0 if batch.dones[t] else 1.0
        next_value = batch.last_value if t == n - 1 else batch.values[t + 1]
        delta = batch.rewards[t] + gamma * batch.truncation_values[t] + gamma * next_value * nonterminal - batch.values[t]
        next_adv = delta + gamma * lam * nonterminal * next_adv
        adv[t] = next_adv
    return adv, adv + batch.values


def clipped_surrogate(policy: ActorCriticPolicy, feats, raw_actions, old_logprobs, advantages, clip_eps) -> float:
    """Mean of ``min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)``."""
    logp = policy.log_probs_and_grads(feats, raw_actions)[0]
    ratio = np.exp(logp - old_logprobs)
    return float(np.mean(np.minimum(ratio * advantages, np.clip(ratio, 1 - clip_eps, 1 + clip_eps) * advantages)))


@dataclass
class Optimizers:
    actor: AdamState
    critic: AdamState


def make_optimizers(policy: ActorCriticPolicy, config: PpoConfig) -> Optimizers:
    return Optimizers(
        AdamState.for_params(policy.actor_params(), config.lr_actor),
        AdamState.for_params(policy.critic.params, config.lr_critic),
    )


def _minibatch_grads(policy, feats, raw, old_logp, adv, returns_scaled, config):
    logp, ent, d_logp_out, d_ent_out, d_logp_ls, d_ent_ls, cache = policy.log_probs_and_grads(feats, raw)
    n = feats.shape[0]
    ratio = np.exp(logp - old_logp)
    surr1 = ratio * adv
    surr2 = np.clip(ratio, 1 - config.clip_eps, 1 + config.clip_eps) * adv
    active = np.where(adv >= 0, ratio < 1 + config.clip_eps, ratio > 1 - config.clip_eps)
    coef = ratio * adv * active
    surrogate = float(np.mean(np.minimum(surr1, surr2)))
    entropy = float(np.mean(ent))
    # loss = -(surrogate + entropy_coef * entropy)
    g_out = -(coef[:, None] * d_logp_out + config.entropy_coef * d_ent_out) / n
    actor_grads, _ = mlp_backward(policy.actor, feats, g_out, cache)
    if policy.continuous:
        g_ls = -np.sum(coef[:, None] * d_logp_ls + config.entropy_coef * d_ent_ls, axis=0) / n
        actor_grads = actor_grads + [g_ls]
    v, vcache = mlp_forward(policy.critic, feats, return_cache=True)
    err = v[:, 0] - returns_scaled
    value_loss = float(0.5 * np.mean(err * err))
    critic_grads, _ = mlp_backward(policy.critic, feats, (err / n)[:, None], vcache)
    clip_frac = float(np.mean(np.abs(ratio - 1) > config.clip_eps))
    return actor_grads, critic_grads, surrogate, entropy, value_loss, clip_frac


def ppo_update(policy: ActorCriticPolicy, batch: RolloutBatch, config: PpoConfig, optimizers=None, rng=None):
    """Run ``config.epochs`` passes of minibatch PPO over one batch.

    Returns ``(new_policy, diagnostics, optimizers)``; the input policy is
    not modified.
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    policy = policy.copy()
    optimizers = make_optimizers(policy, config) if optimizers is None else optimizers
    adv, returns = gae_advantages(batch, config.gamma, config.gae_lambda)
    std = adv.std()
    if std >= 1e-8:
        adv = (adv - adv.mean()) / std
    returns_scaled = returns * policy.reward_scale
    n = len(batch)
    stats = {"surrogate": [], "entropy": [], "value_loss": [], "clip_fraction": []}
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.minibatch_size):
            idx = order[start:start + config.minibatch_size]
            a_grads, c_grads, surr, ent, vloss, cfrac = _minibatch_grads(
                policy, batch.features[idx], batch.raw_actions[idx], batch.logprobs[idx], adv[idx], returns_scaled[idx], config
            )
            if not all(math.isfinite(x) for x in (surr, ent, vloss)):
                raise DivergenceError(f"diverged: surrogate={surr} entropy={ent} value_loss={vloss}")
            a_grads = clip_grad_norm(a_grads, config.max_grad_norm)
            c_grads = clip_grad_norm(c_grads, config.max_grad_norm)
            new_a, optimizers.actor = adam_step(optimizers.actor, policy.actor_params(), a_grads)
            new_c, optimizers.critic = adam_step(optimizers.critic, policy.critic.params, c_grads)
            policy.set_actor_params(new_a)
            policy.critic.set_params(new_c)
            stats["surrogate"].append(surr)
            stats["entropy"].append(ent)
            stats["value_loss"].append(vloss)
            stats["clip_fraction"].append(cfrac)
    diagnostics = {k: float(np.mean(v)) for k, v in stats.items()}
    return policy, diagnostics, optimizers


def train_goal_policy(env, goal: GoalSpec, config: PpoConfig) -> ActorCriticPolicy:
    """Train a PPO actor-critic that pursues ``goal`` using the shaped L1 reward."""
    env.check_goal(goal)
    rng = np.random.default_rng([config.seed & 0xFFFFFFFF, 0x5050])
    scale = config.reward_scale if config.reward_scale is not None else 1.0 / env.max_l1()
    policy = ActorCriticPolicy.init(goal, env.action_space, env.feature_spec(), config, scale, rng)
    optimizers = make_optimizers(policy, config)
    done_steps, cursor, history = 0, None, []
    while done_steps < config.total_steps:
        steps = min(config.rollout_steps, config.total_steps - done_steps)
        batch = collect_rollout(env, goal, policy, steps, rng, cursor)
        cursor = batch.cursor
        try:
            policy, diag, optimizers = ppo_update(policy, batch, config, optimizers, rng)
        except DivergenceError as exc:
            raise DivergenceError(f"goal {goal.id}: {exc} after {done_steps} steps") from exc
        done_steps += steps
        mean_ret = float(np.mean(batch.episode_returns)) if batch.episode_returns else float("nan")
        history.append(mean_ret)
        log.debug("goal %s steps %d mean return %.3f diag %s", goal.id, done_steps, mean_ret, diag)
    policy.metadata = {"learner": "ppo", "env_id": env.env_id, "total_steps": config.total_steps, "seed": config.seed}
    return policy


def greedy_rollout(env, goal, policy, rng=None, max_steps=None):
    """Deterministic episode under the policy's greedy actions; returns (states, actions, reason)."""
    state = env.reset(rng)
    states, actions = [state], []
    limit = max_steps or env.max_steps
    reason = HORIZON
    for t in range(limit):
        a = policy.greedy_actions(state)[0]
        out = env.transition(state, a, goal, t)
        actions.append(a)
        states.append(out.next_state)
        state = out.next_state
        if out.terminal:
            reason = out.terminal_reason
            break
    return states, actions, reason

