"""Small numpy MLPs with hand-written backprop, Adam, and policy heads."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import SIGMA_FLOOR, Categorical, DiagGaussian, DivergenceError, GoalRecError

LOG_2PI = math.log(2.0 * math.pi)


class Mlp:
    """Fully connected network, tanh on hidden layers and identity output.

    Weights are stored as ``(fan_out, fan_in)`` matrices so that a single
    input vector maps as ``W @ x + b``.
    """

    def __init__(self, layer_sizes, weights=None, biases=None):
        self.layer_sizes = [int(n) for n in layer_sizes]
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise GoalRecError("an Mlp needs at least an input and an output layer")
        n = len(self.layer_sizes) - 1
        if weights is None:
            weights = [np.zeros((self.layer_sizes[i + 1], self.layer_sizes[i])) for i in range(n)]
        if biases is None:
            biases = [np.zeros(self.layer_sizes[i + 1]) for i in range(n)]
        self.weights = [np.array(w, dtype=float) for w in weights]
        self.biases = [np.array(b, dtype=float) for b in biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.layer_sizes[i + 1], self.layer_sizes[i]) or b.shape != (self.layer_sizes[i + 1],):
                raise GoalRecError(f"layer {i} parameter shapes do not match layer sizes")

    @classmethod
    def init(cls, layer_sizes, rng, out_gain=1.0):
        """Orthogonal init with gain sqrt(2) on hidden layers and ``out_gain`` on the output."""
        sizes = [int(n) for n in layer_sizes]
        weights, biases = [], []
        for i in range(len(sizes) - 1):
            fan_in, fan_out = sizes[i], sizes[i + 1]
            gain = out_gain if i == len(sizes) - 2 else math.sqrt(2.0)
            tall = fan_out >= fan_in
            a = rng.standard_normal((fan_out, fan_in) if tall else (fan_in, fan_out))
            q, r = np.linalg.qr(a)
            q = q * np.sign(np.diag(r))
            weights.append((q if tall else q.T) * gain)
            biases.append(np.zeros(fan_out))
        return cls(sizes, weights, biases)

    @property
    def params(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def set_params(self, params):
        self.weights = [np.array(p) for p in params[0::2]]
        self.biases = [np.array(p) for p in params[1::2]]

    def copy(self) -> "Mlp":
        return Mlp(self.layer_sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def n_params(self) -> int:
        return sum(p.size for p in self.params)


def mlp_forward(net: Mlp, x, return_cache: bool = False):
    """Evaluate ``net`` on one input vector or a batch of row vectors."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != net.layer_sizes[0]:
        raise GoalRecError(f"input size {h.shape[1]} != {net.layer_sizes[0]}")
    acts = [h]
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w.T + b
        h = z if i == last else np.tanh(z)
        acts.append(h)
    out = h[0] if single else h
    if return_cache:
        return out, acts
    return out


def mlp_backward(net: Mlp, x, output_grad, cache=None):
    """Reverse-mode gradients of ``sum(output * output_grad)``.

    Returns ``(param_grads, input_grad)`` where ``param_grads`` follows the
    ``[W0, b0, W1, b1, ...]`` order of :attr:`Mlp.params`; batched inputs
    accumulate gradients over rows.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    g = np.asarray(output_grad, dtype=float)
    g = g[None, :] if g.ndim == 1 else g
    if cache is None:
        _, cache = mlp_forward(net, x, return_cache=True)
    if g.shape != cache[-1].shape:
        raise GoalRecError("output_grad shape does not match network output")
    grads = [None] * (2 * len(net.weights))
    last = len(net.weights) - 1
    for i in range(last, -1, -1):
        if i != last:
            g = g * (1.0 - cache[i + 1] ** 2)
        grads[2 * i] = g.T @ cache[i]
        grads[2 * i + 1] = g.sum(axis=0)
        g = g @ net.weights[i]
    return grads, (g[0] if single else g)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, lr=1e-3):
        return cls(lr=lr, m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(state: AdamState, params, grads, lr: float | None = None):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise GoalRecError("parameter, gradient and moment lists differ in length")
    lr = state.lr if lr is None else lr
    t = state.step + 1
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise GoalRecError("shape mismatch in adam_step")
        if not np.all(np.isfinite(g)):
            raise DivergenceError("diverged")
        m = state.beta1 * m + (1 - state.beta1) * g
        v = state.beta2 * v + (1 - state.beta2) * g * g
        mhat = m / (1 - state.beta1**t)
        vhat = v / (1 - state.beta2**t)
        new_p.append(p - lr * mhat / (np.sqrt(vhat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(state.lr, state.beta1, state.beta2, state.eps, t, new_m, new_v)


def clip_grad_norm(grads, max_norm):
    if max_norm is None or max_norm <= 0:
        return grads
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total > max_norm:
        return [g * (max_norm / (total + 1e-12)) for g in grads]
    return grads


# -- distribution heads ---------------------------------------------------


def softmax(logits, axis=-1):
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(logits, axis=-1):
    z = logits - np.max(logits, axis=axis, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=axis, keepdims=True))


def dist_logprob(dist, action) -> float:
    if isinstance(dist, Categorical):
        if not isinstance(action, (int, np.integer)):
            raise GoalRecError("categorical distribution needs a discrete action")
        p = dist.probs[int(action)]
        return math.log(p) if p > 0 else -math.inf
    if isinstance(dist, DiagGaussian):
        a = np.asarray(action, dtype=float).reshape(-1)
        if isinstance(action, (int, np.integer)) or a.shape != dist.mean.shape:
            raise GoalRecError("gaussian distribution needs a continuous action of matching size")
        z = (a - dist.mean) / dist.std
        return float(np.sum(-0.5 * z * z - np.log(dist.std) - 0.5 * LOG_2PI))
    raise GoalRecError(f"unknown distribution {dist!r}")


def dist_sample(dist, rng: np.random.Generator):
    if isinstance(dist, Categorical):
        return int(rng.choice(dist.probs.size, p=dist.probs))
    return dist.mean + dist.std * rng.standard_normal(dist.mean.shape)


def dist_sample_many(dist, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` samples as an ``(n, action_dim)`` array (index column for categoricals)."""
    if isinstance(dist, Categorical):
        return rng.choice(dist.probs.size, size=n, p=dist.probs).astype(float)[:, None]
    return dist.mean + dist.std * rng.standard_normal((n, dist.mean.size))


def dist_mean_std(dist):
    """Mean and standard deviation of the numeric action under ``dist``.

    For categoricals the action-index random variable is used.
    """
    if isinstance(dist, DiagGaussian):
        return dist.mean.copy(), dist.std.copy()
    idx = np.arange(dist.probs.size, dtype=float)
    mean = float(np.dot(dist.probs, idx))
    var = float(np.dot(dist.probs, (idx - mean) ** 2))
    return np.array([mean]), np.array([max(math.sqrt(max(var, 0.0)), SIGMA_FLOOR)])
