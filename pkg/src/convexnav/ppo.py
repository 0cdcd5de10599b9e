"""PPO with separate policy and value MLPs and a sigmoid-squashed Gaussian policy.

The policy samples a pre-squash vector ``z ~ N(mu, sigma^2)`` and emits
``sigmoid(z)`` as the raw action.  Log-probabilities include the change of
variables, so they are densities over the open unit cube.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .actions import RawAction
from .errors import ConfigMismatch, DimensionMismatch, NonFiniteLoss
from .nn import Adam, Mlp, clip_by_global_norm
from .obs import StackedState

LOG_STD_MIN = math.log(1e-3)
LOG_STD_MAX = math.log(2.0)
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    epochs: int = 8
    minibatch: int = 256
    rollout_steps: int = 4096
    n_worlds: int = 8
    lr_policy: float = 3e-4
    lr_value: float = 1e-3
    ent_coef: float = 0.003
    max_grad_norm: float = 0.5
    hidden: tuple[int, ...] = (256, 256)
    init_log_std: float = 0.0
    # pre-sigmoid action mean at initialisation: (alpha_s, beta_s, alpha_l, beta_l)
    init_mean: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("gae_lambda must lie in [0, 1]")
        if self.clip_eps <= 0 or self.epochs < 1 or self.minibatch < 1 or self.rollout_steps < 1:
            raise ValueError("clip_eps, epochs, minibatch and rollout_steps must be positive")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class PolicyNet:
    def __init__(
        self,
        input_dim: int,
        rng: np.random.Generator,
        hidden=(256, 256),
        n_actions: int = 4,
        scale: np.ndarray | None = None,
        init_log_std: float = 0.0,
        init_mean=None,
    ):
        self.input_dim = int(input_dim)
        self.n_actions = n_actions
        self.mlp = Mlp([self.input_dim, *hidden, n_actions], rng, out_gain=0.01)
        self.log_std = np.full(n_actions, float(init_log_std))
        if init_mean is not None:
            self.mlp.params[-1][:] = np.asarray(init_mean, dtype=float)
        self.scale = np.ones(self.input_dim) if scale is None else np.asarray(scale, dtype=float).copy()

    @property
    def params(self) -> list[np.ndarray]:
        return [*self.mlp.params, self.log_std]

    def load(self, params: list[np.ndarray]) -> None:
        self.mlp.load(params[:-1])
        self.log_std = np.array(params[-1], dtype=float)

    def prepare(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.input_dim:
            raise DimensionMismatch(f"state has {x.shape[1]} entries, network expects {self.input_dim}")
        return np.clip(x / self.scale, -5.0, 5.0)

    def std(self) -> np.ndarray:
        return np.exp(np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX))

    def mean(self, x) -> np.ndarray:
        return self.mlp(self.prepare(x))

    def log_prob(self, x, z: np.ndarray) -> np.ndarray:
        """Density of ``sigmoid(z)`` under the squashed policy, summed over dims."""
        mu = self.mean(x)
        return squashed_log_prob(z, mu, np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX))


class ValueNet:
    def __init__(self, input_dim: int, rng: np.random.Generator, hidden=(256, 256), scale: np.ndarray | None = None):
        self.input_dim = int(input_dim)
        self.mlp = Mlp([self.input_dim, *hidden, 1], rng, out_gain=1.0)
        self.scale = np.ones(self.input_dim) if scale is None else np.asarray(scale, dtype=float).copy()

    @property
    def params(self) -> list[np.ndarray]:
        return self.mlp.params

    def load(self, params: list[np.ndarray]) -> None:
        self.mlp.load(params)

    def prepare(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.input_dim:
            raise DimensionMismatch(f"state has {x.shape[1]} entries, network expects {self.input_dim}")
        return np.clip(x / self.scale, -5.0, 5.0)

    def __call__(self, x) -> np.ndarray:
        return self.mlp(self.prepare(x))[:, 0]


def gaussian_log_prob(z: np.ndarray, mu: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    u = (z - mu) * np.exp(-log_std)
    return np.sum(-0.5 * u * u - log_std - HALF_LOG_2PI, axis=-1)


def squashed_log_prob(z: np.ndarray, mu: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    # log |d sigmoid / dz| = -softplus(z) - softplus(-z)
    return gaussian_log_prob(z, mu, log_std) + np.sum(softplus(z) + softplus(-z), axis=-1)


@dataclass
class ActResult:
    actions: np.ndarray
    z: np.ndarray
    log_prob: np.ndarray
    value: np.ndarray

    def raw(self, i: int = 0) -> RawAction:
        return RawAction.from_array(self.actions[i])


def _as_matrix(state) -> np.ndarray:
    if isinstance(state, StackedState):
        return state.flatten()[None, :]
    return np.atleast_2d(np.asarray(state, dtype=float))


def act_batch(policy: PolicyNet, value: ValueNet, states, stochastic: bool, rng: np.random.Generator | None = None) -> ActResult:
    x = _as_matrix(states)
    mu = policy.mean(x)
    log_std = np.clip(policy.log_std, LOG_STD_MIN, LOG_STD_MAX)
    if stochastic:
        if rng is None:
            raise ValueError("stochastic acting needs an rng")
        z = mu + np.exp(log_std) * rng.standard_normal(mu.shape)
    else:
        z = mu
    logp = squashed_log_prob(z, mu, log_std)
    return ActResult(sigmoid(z), z, logp, value(x))


def act(policy: PolicyNet, value: ValueNet, state, stochastic: bool, rng: np.random.Generator | None = None):
    """Single state in, ``(RawAction, log_prob, value)`` out."""
    res = act_batch(policy, value, state, stochastic, rng)
    return res.raw(0), float(res.log_prob[0]), float(res.value[0])


def gae(
    rewards,
    values,
    dones,
    gamma: float,
    lam: float,
    last_value: float = 0.0,
    next_values=None,
    truncated=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalised advantage estimates and bootstrapped returns.

    ``dones`` marks terminal steps (no bootstrap).  ``truncated`` marks steps
    where the trajectory is cut without terminating; the trace stops there but
    ``next_values`` still bootstraps.  By default ``next_values[t] = values[t+1]``
    and ``last_value`` closes the sequence.
    """
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    d = np.asarray(dones, dtype=bool)
    T = len(r)
    if len(v) != T or len(d) != T:
        raise ValueError("rewards, values and dones must have equal length")
    if next_values is None:
        nv = np.append(v[1:], last_value)
    else:
        nv = np.asarray(next_values, dtype=float)
    cut = d.copy() if truncated is None else d | np.asarray(truncated, dtype=bool)
    adv = np.zeros(T)
    running = 0.0
    for t in range(T - 1, -1, -1):
        delta = r[t] + gamma * nv[t] * (0.0 if d[t] else 1.0) - v[t]
        running = delta + gamma * lam * (0.0 if cut[t] else running)
        adv[t] = running
    return adv, adv + v


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    std = float(np.std(adv))
    return (adv - float(np.mean(adv))) / (std + 1e-8)


@dataclass
class Batch:
    states: np.ndarray
    z: np.ndarray
    log_prob: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray

    def __len__(self) -> int:
        return len(self.log_prob)

    def subset(self, idx: np.ndarray) -> "Batch":
        return Batch(self.states[idx], self.z[idx], self.log_prob[idx], self.advantages[idx], self.returns[idx])


def policy_loss_and_grads(policy: PolicyNet, batch: Batch, clip_eps: float, ent_coef: float):
    """Clipped surrogate minus entropy bonus; returns ``(loss, grads, stats)``."""
    x = policy.prepare(batch.states)
    mu, cache = policy.mlp.forward(x)
    raw_ls = policy.log_std
    ls = np.clip(raw_ls, LOG_STD_MIN, LOG_STD_MAX)
    ls_mask = ((raw_ls >= LOG_STD_MIN) & (raw_ls <= LOG_STD_MAX)).astype(float)
    sig = np.exp(ls)
    logp = squashed_log_prob(batch.z, mu, ls)
    ratio = np.exp(logp - batch.log_prob)
    A = batch.advantages
    surr1 = ratio * A
    surr2 = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * A
    B = len(A)
    surrogate = -float(np.mean(np.minimum(surr1, surr2)))
    entropy = float(np.sum(ls + 0.5 + HALF_LOG_2PI))
    loss = surrogate - ent_coef * entropy

    g_logp = np.where(surr1 <= surr2, -ratio * A / B, 0.0)
    u = (batch.z - mu) / sig
    g_mu = g_logp[:, None] * u / sig
    g_ls = (g_logp[:, None] * (u * u - 1.0)).sum(axis=0) - ent_coef
    grads = policy.mlp.backward(cache, g_mu)
    grads.append(g_ls * ls_mask)
    stats = {
        "policy_loss": surrogate,
        "entropy": entropy,
        "approx_kl": float(np.mean(batch.log_prob - logp)),
        "clip_frac": float(np.mean(np.abs(ratio - 1.0) > clip_eps)),
    }
    return loss, grads, stats


def value_loss_and_grads(value: ValueNet, batch: Batch):
    x = value.prepare(batch.states)
    out, cache = value.mlp.forward(x)
    err = out[:, 0] - batch.returns
    loss = float(np.mean(err * err))
    g = (2.0 / len(err)) * err[:, None]
    return loss, value.mlp.backward(cache, g)


@dataclass
class Optimizers:
    policy: Adam
    value: Adam

    @classmethod
    def for_config(cls, config: PpoConfig) -> "Optimizers":
        return cls(Adam(config.lr_policy), Adam(config.lr_value))


def update(
    batch: Batch,
    policy: PolicyNet,
    value: ValueNet,
    config: PpoConfig,
    rng: np.random.Generator,
    optim: Optimizers,
    normalize: bool = True,
) -> dict[str, float]:
    """PPO epochs over ``batch``; returns mean losses of the last epoch."""
    if normalize:
        batch = Batch(batch.states, batch.z, batch.log_prob, normalize_advantages(batch.advantages), batch.returns)
    n = len(batch)
    totals: dict[str, float] = {}
    for _ in range(config.epochs):
        perm = rng.permutation(n)
        totals = {}
        count = 0
        for start in range(0, n, config.minibatch):
            mb = batch.subset(perm[start : start + config.minibatch])
            p_loss, p_grads, stats = policy_loss_and_grads(policy, mb, config.clip_eps, config.ent_coef)
            v_loss, v_grads = value_loss_and_grads(value, mb)
            if not (math.isfinite(p_loss) and math.isfinite(v_loss)):
                raise NonFiniteLoss(
                    f"non-finite loss (policy={p_loss}, value={v_loss}); "
                    f"log_std={policy.log_std.tolist()}, adv range=({mb.advantages.min()}, {mb.advantages.max()})"
                )
            p_grads, p_norm = clip_by_global_norm(p_grads, config.max_grad_norm)
            v_grads, v_norm = clip_by_global_norm(v_grads, config.max_grad_norm)
            params = policy.params
            optim.policy.step(params, p_grads)
            policy.load(params)
            optim.value.step(value.params, v_grads)
            stats.update(value_loss=v_loss, policy_grad_norm=p_norm, value_grad_norm=v_norm)
            for k, val in stats.items():
                totals[k] = totals.get(k, 0.0) + val
            count += 1
        totals = {k: val / count for k, val in totals.items()}
    return totals


@dataclass
class Checkpoint:
    policy_params: list[np.ndarray]
    value_params: list[np.ndarray]
    scale: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return int(self.policy_params[0].shape[0])

    def build(self) -> tuple[PolicyNet, ValueNet]:
        hidden = tuple(int(self.policy_params[2 * i].shape[1]) for i in range(len(self.policy_params) // 2 - 1))
        rng = np.random.default_rng(0)
        policy = PolicyNet(self.input_dim, rng, hidden, int(self.policy_params[-2].shape[0]), self.scale)
        value = ValueNet(self.input_dim, rng, hidden, self.scale)
        policy.load(self.policy_params)
        value.load(self.value_params)
        return policy, value


def make_checkpoint(policy: PolicyNet, value: ValueNet, meta: dict | None = None) -> Checkpoint:
    return Checkpoint([p.copy() for p in policy.params], [p.copy() for p in value.params], policy.scale.copy(), dict(meta or {}))


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    arrays = {f"policy_{i}": p for i, p in enumerate(ckpt.policy_params)}
    arrays.update({f"value_{i}": p for i, p in enumerate(ckpt.value_params)})
    arrays["scale"] = ckpt.scale
    meta = {"version": CHECKPOINT_VERSION, **ckpt.meta}
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path: str | Path) -> Checkpoint:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ConfigMismatch(f"checkpoint version {meta.get('version')} is not {CHECKPOINT_VERSION}")
        n_pol = sum(1 for k in data.files if k.startswith("policy_"))
        n_val = sum(1 for k in data.files if k.startswith("value_"))
        pol = [data[f"policy_{i}"] for i in range(n_pol)]
        val = [data[f"value_{i}"] for i in range(n_val)]
        return Checkpoint(pol, val, data["scale"], meta)
