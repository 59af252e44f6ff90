"""DDPG with a hybrid discrete/continuous actor.

The proposed actor shares a dense feature extractor across UEs and gives
each UE two heads: a softmax over base stations and a tanh pair of beam
angles that also sees that UE's BS scores. The BS is picked by argmax of
the (optionally noise-perturbed) scores, so the discrete choice stays
differentiable through the scores during training.

Flat actions are laid out per UE: ``[scores (N_BS), angles (2)]`` for the
proposed and vanilla actors, ``[angles]`` for ``bs_oracle`` and
``[scores]`` for ``angle_oracle``.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass

import numpy as np

from . import nn
from .env import ResolvedAction

VARIANTS = ("proposed", "vanilla", "bs_oracle", "angle_oracle")


@dataclass
class TrainConfig:
    gamma: float = 0.60
    soft_lambda: float = 0.001
    eta_a: float = 1e-4
    eta_c: float = 1e-3
    batch_n: int = 64
    episodes: int = 1000
    steps_per_episode: int = 1000
    buffer_size: int = 100_000
    hidden: tuple = (128, 128)

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)


@dataclass
class ExplorationSchedule:
    eps_bs_init: float = 1.0
    eps_bs_decay_rate: float = 1e-6
    sigma_theta_init: float = 0.5
    sigma_theta_final: float = 0.01
    sigma_theta_steps: int = 500_000

    def eps_bs(self, t: int) -> float:
        return float(self.eps_bs_init * np.exp(-self.eps_bs_decay_rate * t))

    def sigma_theta(self, t: int) -> float:
        if self.sigma_theta_steps <= 0:
            return self.sigma_theta_final
        frac = min(t / self.sigma_theta_steps, 1.0)
        return float(self.sigma_theta_init + frac * (self.sigma_theta_final - self.sigma_theta_init))


@dataclass
class Genie:
    """Privileged knowledge handed to the oracle-assisted variants."""

    best_bs: np.ndarray  # (N_UE,)
    theta: np.ndarray  # (N_UE, N_BS) LOS elevation per link
    phi: np.ndarray  # (N_UE, N_BS) LOS azimuth per link, folded


def angles_to_radians(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map tanh outputs in [-1, 1]^2 to (elevation, azimuth) radians."""
    raw = np.asarray(raw, dtype=float).reshape(-1, 2)
    return 3 * np.pi / 4 + raw[:, 0] * np.pi / 4, raw[:, 1] * np.pi / 2


def _pack_layers(layers) -> tuple[np.ndarray, list]:
    flat, views = nn.pack_params(nn.layer_params(layers))
    for layer, w, b in zip(layers, views[0::2], views[1::2]):
        layer.weights, layer.bias = w, b
    return flat, views


class HybridActor:
    """Shared extractor plus per-UE BS-softmax and angle-tanh heads.

    Head parameters live in stacked arrays so that all UEs are evaluated
    with one matmul; ``bs_heads[i]`` and ``angle_heads[i]`` are
    :class:`~blindbeam.nn.DenseLayer` views into them.
    """

    def __init__(self, n_in: int, n_ue: int, n_bs: int, hidden, rng: np.random.Generator,
                 predict_bs: bool = True, predict_angles: bool = True):
        if not (predict_bs or predict_angles):
            raise ValueError("actor must predict something")
        self.n_in, self.n_ue, self.n_bs = n_in, n_ue, n_bs
        self.predict_bs, self.predict_angles = predict_bs, predict_angles
        widths = [n_in, *hidden]
        self.extractor = [nn.DenseLayer.init(a, b, "relu", rng) for a, b in zip(widths[:-1], widths[1:])]
        self.d_l = d_l = widths[-1]
        self.bs_w = np.zeros((n_ue, n_bs, d_l) if predict_bs else (0, n_bs, d_l))
        self.bs_b = np.zeros(self.bs_w.shape[:2])
        ang_in = d_l + (n_bs if predict_bs else 0)
        self.ang_w = np.zeros((n_ue, 2, ang_in) if predict_angles else (0, 2, ang_in))
        self.ang_b = np.zeros(self.ang_w.shape[:2])
        for i in range(len(self.bs_w)):
            src = nn.DenseLayer.init(d_l, n_bs, "softmax", rng)
            self.bs_w[i], self.bs_b[i] = src.weights, src.bias
        for i in range(len(self.ang_w)):
            src = nn.DenseLayer.init(ang_in, 2, "tanh", rng)
            self.ang_w[i], self.ang_b[i] = src.weights, src.bias
        self.block = (n_bs if predict_bs else 0) + (2 if predict_angles else 0)
        self._pack()

    def _pack(self) -> None:
        # all parameters become views of one buffer, so optimiser steps are single vector ops
        self.flat, views = nn.pack_params(self.params())
        n_ext = 2 * len(self.extractor)
        for layer, w, b in zip(self.extractor, views[0:n_ext:2], views[1:n_ext:2]):
            layer.weights, layer.bias = w, b
        rest = iter(views[n_ext:])
        if self.predict_bs:
            self.bs_w, self.bs_b = next(rest), next(rest)
        if self.predict_angles:
            self.ang_w, self.ang_b = next(rest), next(rest)
        self.bs_heads = [nn.DenseLayer(self.bs_w[i], self.bs_b[i], "softmax") for i in range(len(self.bs_w))]
        self.angle_heads = [nn.DenseLayer(self.ang_w[i], self.ang_b[i], "tanh") for i in range(len(self.ang_w))]

    @property
    def out_dim(self) -> int:
        return self.n_ue * self.block

    def named_layers(self):
        out = [(f"extractor/{i}", l) for i, l in enumerate(self.extractor)]
        out += [(f"bs_head/{i}", l) for i, l in enumerate(self.bs_heads)]
        out += [(f"angle_head/{i}", l) for i, l in enumerate(self.angle_heads)]
        return out

    def params(self) -> list[np.ndarray]:
        heads = []
        if self.predict_bs:
            heads += [self.bs_w, self.bs_b]
        if self.predict_angles:
            heads += [self.ang_w, self.ang_b]
        return nn.layer_params(self.extractor) + heads

    def forward(self, x):
        x_l, c_ext = nn.forward(self.extractor, x)
        squeeze = x_l.ndim == 1
        x_l = np.atleast_2d(x_l)
        n, u, k, d = len(x_l), self.n_ue, self.n_bs, self.d_l
        parts, scores = [], None
        if self.predict_bs:
            logits = (x_l @ self.bs_w.reshape(u * k, d).T).reshape(n, u, k) + self.bs_b
            scores = nn.softmax(logits)
            parts.append(scores)
        ang = None
        if self.predict_angles:
            pre = (x_l @ self.ang_w[:, :, :d].reshape(u * 2, d).T).reshape(n, u, 2) + self.ang_b
            if self.predict_bs:
                pre += np.einsum("nuk,uck->nuc", scores, self.ang_w[:, :, d:])
            ang = np.tanh(pre)
            parts.append(ang)
        out = np.concatenate(parts, axis=2).reshape(n, -1)
        return (out[0] if squeeze else out), (c_ext, x_l, scores, ang, squeeze)

    def backward(self, cache, grad_out):
        c_ext, x_l, scores, ang, squeeze = cache
        n, u, k, d = len(x_l), self.n_ue, self.n_bs, self.d_l
        g = np.asarray(grad_out, dtype=float).reshape(n, u, self.block)
        g_xl = np.zeros((n, d))
        head_grads = []
        g_scores = g[:, :, :k] if self.predict_bs else None
        if self.predict_angles:
            gz = g[:, :, -2:] * (1.0 - ang * ang)  # (n, u, 2)
            gz2 = gz.reshape(n, u * 2)
            d_w = np.empty_like(self.ang_w)
            d_w[:, :, :d] = (gz2.T @ x_l).reshape(u, 2, d)
            g_xl += gz2 @ self.ang_w[:, :, :d].reshape(u * 2, d)
            if self.predict_bs:
                d_w[:, :, d:] = np.einsum("nuc,nuk->uck", gz, scores)
                g_scores = g_scores + np.einsum("nuc,uck->nuk", gz, self.ang_w[:, :, d:])
            ang_grads = [d_w, gz.sum(axis=0)]
        if self.predict_bs:
            gs = nn.softmax_vjp(scores, g_scores).reshape(n, u * k)
            head_grads += [(gs.T @ x_l).reshape(u, k, d), gs.sum(axis=0).reshape(u, k)]
            g_xl += gs @ self.bs_w.reshape(u * k, d)
        if self.predict_angles:
            head_grads += ang_grads
        ext_grads, g_x = nn.backward(self.extractor, c_ext, g_xl[0] if squeeze else g_xl)
        return nn.flatten_grads(ext_grads) + head_grads, g_x

    def clone(self) -> "HybridActor":
        twin = copy.copy(self)
        twin.extractor = copy.deepcopy(self.extractor)
        twin.bs_w, twin.bs_b = self.bs_w.copy(), self.bs_b.copy()
        twin.ang_w, twin.ang_b = self.ang_w.copy(), self.ang_b.copy()
        twin._pack()
        return twin


class VanillaActor:
    """Plain dense actor; per-UE slices squashed by softmax (scores) and tanh (angles)."""

    predict_bs = predict_angles = True
    # standard DDPG exploration: the same Gaussian noise on every output, no eps-greedy on scores
    plain_action_noise = True

    def __init__(self, n_in: int, n_ue: int, n_bs: int, hidden, rng: np.random.Generator):
        self.n_in, self.n_ue, self.n_bs = n_in, n_ue, n_bs
        self.block = n_bs + 2
        widths = [n_in, *hidden]
        self.layers = [nn.DenseLayer.init(a, b, "relu", rng) for a, b in zip(widths[:-1], widths[1:])]
        self.layers.append(nn.DenseLayer.init(widths[-1], self.out_dim, "identity", rng))
        self.flat, _ = _pack_layers(self.layers)

    @property
    def out_dim(self) -> int:
        return self.n_ue * self.block

    def named_layers(self):
        return [(f"dense/{i}", l) for i, l in enumerate(self.layers)]

    def params(self):
        return nn.layer_params(self.layers)

    def clone(self):
        twin = copy.deepcopy(self)
        twin.flat, _ = _pack_layers(twin.layers)
        return twin

    def forward(self, x):
        z, cache = nn.forward(self.layers, x)
        squeeze = z.ndim == 1
        z3 = np.atleast_2d(z).reshape(-1, self.n_ue, self.block)
        y = np.concatenate([nn.softmax(z3[..., :self.n_bs]), np.tanh(z3[..., self.n_bs:])], axis=2)
        y = y.reshape(-1, self.out_dim)
        return (y[0] if squeeze else y), (cache, y, squeeze)

    def backward(self, cache, grad_out):
        c, y, squeeze = cache
        g = np.atleast_2d(np.asarray(grad_out, dtype=float)).reshape(-1, self.n_ue, self.block)
        y3 = y.reshape(-1, self.n_ue, self.block)
        gz = np.concatenate([nn.softmax_vjp(y3[..., :self.n_bs], g[..., :self.n_bs]),
                             g[..., self.n_bs:] * (1.0 - y3[..., self.n_bs:] ** 2)], axis=2)
        gz = gz.reshape(-1, self.out_dim)
        grads, g_x = nn.backward(self.layers, c, gz[0] if squeeze else gz)
        return nn.flatten_grads(grads), g_x


class Critic:
    """Dense Q-network on ``[state, flat action]`` with a scalar linear output."""

    def __init__(self, state_dim: int, action_dim: int, hidden, rng: np.random.Generator):
        self.state_dim, self.action_dim = state_dim, action_dim
        widths = [state_dim + action_dim, *hidden]
        self.layers = [nn.DenseLayer.init(a, b, "relu", rng) for a, b in zip(widths[:-1], widths[1:])]
        self.layers.append(nn.DenseLayer.init(widths[-1], 1, "identity", rng))
        self.flat, _ = _pack_layers(self.layers)

    def named_layers(self):
        return [(f"dense/{i}", l) for i, l in enumerate(self.layers)]

    def params(self):
        return nn.layer_params(self.layers)

    def clone(self):
        twin = copy.deepcopy(self)
        twin.flat, _ = _pack_layers(twin.layers)
        return twin

    def forward(self, state, action):
        s, a = np.atleast_2d(state), np.atleast_2d(action)
        if s.shape[1] != self.state_dim or a.shape[1] != self.action_dim:
            raise ValueError(f"critic expects state {self.state_dim} + action {self.action_dim}, "
                             f"got {s.shape[1]} + {a.shape[1]}")
        q, cache = nn.forward(self.layers, np.concatenate([s, a], axis=1))
        return q[:, 0], cache

    def backward(self, cache, grad_q, param_grads: bool = True):
        """Returns (parameter gradients or None, gradient w.r.t. the action input)."""
        grads, g_in = nn.backward(self.layers, cache, np.asarray(grad_q, dtype=float)[:, None], param_grads)
        return (nn.flatten_grads(grads) if param_grads else None), g_in[:, self.state_dim:]


class ReplayBuffer:
    """Fixed-capacity ring of (s, a, r, s') with oldest-first eviction."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def add(self, state, action, reward, next_state) -> None:
        i = self._next
        self.states[i], self.actions[i], self.rewards[i], self.next_states[i] = state, action, reward, next_state
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def ordered(self):
        """Stored experiences, oldest first."""
        idx = (self._next - self._size + np.arange(self._size)) % self.capacity
        return self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx]

    def sample(self, n: int, rng: np.random.Generator):
        idx = rng.integers(self._size, size=n)
        return self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx]


def explore_and_resolve(flat, actor, schedule: ExplorationSchedule | None, t: int,
                        rng: np.random.Generator, genie: Genie | None = None):
    """Perturb one noiseless actor output and turn it into radio settings.

    With probability ``eps_bs(t)`` a UE's BS scores get unit Gaussian noise;
    angle outputs always get Gaussian noise of std ``sigma_theta(t)`` and are
    clipped to [-1, 1]. Actors flagged ``plain_action_noise`` get the angle
    noise on their scores too, instead of the eps-gated draw.
    ``schedule=None`` means no exploration. Returns the
    flat action to store and the :class:`ResolvedAction` to execute.
    """
    n_ue, n_bs = actor.n_ue, actor.n_bs
    blocks = np.asarray(flat, dtype=float).reshape(n_ue, actor.block).copy()
    if actor.predict_bs:
        scores = blocks[:, :n_bs]
        if schedule is not None and getattr(actor, "plain_action_noise", False):
            scores += rng.normal(0.0, schedule.sigma_theta(t), scores.shape)
        elif schedule is not None:
            eps = schedule.eps_bs(t)
            hit = rng.random(n_ue) < eps
            scores[hit] += rng.normal(0.0, 1.0, (int(hit.sum()), n_bs))
        bs = np.argmax(scores, axis=1)  # ties -> lowest index
    else:
        bs = np.asarray(genie.best_bs, dtype=int)
    if actor.predict_angles:
        ang = blocks[:, -2:]
        if schedule is not None:
            ang += rng.normal(0.0, schedule.sigma_theta(t), ang.shape)
        np.clip(ang, -1.0, 1.0, out=ang)
        theta, phi = angles_to_radians(ang)
    else:
        ue = np.arange(n_ue)
        theta, phi = genie.theta[ue, bs], genie.phi[ue, bs]
    return blocks.reshape(-1), ResolvedAction(bs, theta, phi)


def bellman_targets(rewards, next_states, actor_target, critic_target, gamma: float) -> np.ndarray:
    a2, _ = actor_target.forward(next_states)
    q2, _ = critic_target.forward(next_states, a2)
    return np.asarray(rewards, dtype=float) + gamma * q2


def msbe(targets, q) -> float:
    return float(np.mean((np.asarray(targets) - np.asarray(q)) ** 2))


def critic_grads(critic: Critic, states, actions, targets):
    """Gradient of the mean squared Bellman error, targets held fixed."""
    q, cache = critic.forward(states, actions)
    n = len(q)
    grads, _ = critic.backward(cache, -2.0 * (targets - q) / n)
    return grads, msbe(targets, q)


def actor_grads(actor, critic: Critic, states):
    """Gradient of ``-mean Q(s, A(s))`` with respect to the actor parameters."""
    a, a_cache = actor.forward(states)
    q, c_cache = critic.forward(states, a)
    n = len(q)
    _, g_a = critic.backward(c_cache, np.full(n, 1.0 / n), param_grads=False)
    grads, _ = actor.backward(a_cache, -g_a)
    return grads, float(q.mean())


def soft_update(active_params, target_params, soft_lambda: float) -> None:
    """target <- lambda * active + (1 - lambda) * target, in place."""
    for p, tp in zip(active_params, target_params):
        if p.shape != tp.shape:
            raise ValueError("active and target shapes differ")
        tp *= 1.0 - soft_lambda
        tp += soft_lambda * p


class DDPGAgent:
    def __init__(self, kind: str, n_ue: int, n_bs: int, cfg: TrainConfig | None = None,
                 schedule: ExplorationSchedule | None = None, seed: int = 0):
        if kind not in VARIANTS:
            raise ValueError(f"unknown variant {kind!r}; expected one of {VARIANTS}")
        self.kind, self.n_ue, self.n_bs = kind, n_ue, n_bs
        self.cfg = cfg or TrainConfig()
        self.schedule = schedule or ExplorationSchedule()
        self.rng = np.random.default_rng(seed)
        self.obs_dim = n_ue * (2 * n_bs + 1) if kind == "bs_oracle" else n_ue * (n_bs + 1)
        hidden = self.cfg.hidden
        if kind == "vanilla":
            self.actor = VanillaActor(self.obs_dim, n_ue, n_bs, hidden, self.rng)
        else:
            self.actor = HybridActor(self.obs_dim, n_ue, n_bs, hidden, self.rng,
                                     predict_bs=kind != "bs_oracle", predict_angles=kind != "angle_oracle")
        self.critic = Critic(self.obs_dim, self.actor.out_dim, hidden, self.rng)
        self.actor_target = self.actor.clone()
        self.critic_target = self.critic.clone()
        self.actor_opt = nn.AdamState.for_params([self.actor.flat])
        self.critic_opt = nn.AdamState.for_params([self.critic.flat])
        self.buffer = ReplayBuffer(self.cfg.buffer_size, self.obs_dim, self.actor.out_dim)
        self.t = 0

    @property
    def needs_genie(self) -> bool:
        return self.kind in ("bs_oracle", "angle_oracle")

    def observe(self, state: np.ndarray, genie: Genie | None = None) -> np.ndarray:
        """Agent input for an environment state; ``bs_oracle`` prepends a one-hot best BS per UE."""
        if self.kind != "bs_oracle":
            return state
        onehot = np.eye(self.n_bs)[np.asarray(genie.best_bs, dtype=int)]
        return np.concatenate([onehot, np.reshape(state, (self.n_ue, -1))], axis=1).reshape(-1)

    def act(self, obs, genie: Genie | None = None, explore: bool = True):
        raw, _ = self.actor.forward(obs)
        schedule = self.schedule if explore else None
        return explore_and_resolve(raw, self.actor, schedule, self.t, self.rng, genie)

    def remember(self, obs, flat_action, reward, next_obs) -> None:
        self.buffer.add(obs, flat_action, reward, next_obs)
        self.t += 1

    def update(self) -> float | None:
        """One minibatch DDPG step (critic, actor, then both targets)."""
        if len(self.buffer) < self.cfg.batch_n:
            return None
        batch = self.buffer.sample(self.cfg.batch_n, self.rng)
        return ddpg_update(batch, self, self.cfg)

    def state_dict(self) -> tuple[dict, dict]:
        arrays = {}
        for tag, net in (("actor", self.actor), ("critic", self.critic),
                         ("actor_target", self.actor_target), ("critic_target", self.critic_target)):
            for name, layer in net.named_layers():
                arrays[f"{tag}/{name}/W"] = layer.weights
                arrays[f"{tag}/{name}/b"] = layer.bias
        for tag, opt in (("actor_opt", self.actor_opt), ("critic_opt", self.critic_opt)):
            for i, (m, v) in enumerate(zip(opt.first_moment, opt.second_moment)):
                arrays[f"{tag}/m/{i}"] = m
                arrays[f"{tag}/v/{i}"] = v
        meta = {
            "kind": self.kind, "n_ue": self.n_ue, "n_bs": self.n_bs, "t": self.t,
            "train": {**asdict(self.cfg), "hidden": list(self.cfg.hidden)},
            "schedule": asdict(self.schedule),
            "actor_opt_steps": self.actor_opt.step_count, "critic_opt_steps": self.critic_opt.step_count,
            "layers": {tag: [(n, l.activation, list(l.weights.shape)) for n, l in net.named_layers()]
                       for tag, net in (("actor", self.actor), ("critic", self.critic))},
        }
        return arrays, meta

    def save(self, path) -> None:
        nn.save_arrays(path, *self.state_dict())

    @classmethod
    def load(cls, path) -> "DDPGAgent":
        arrays, meta = nn.load_arrays(path)
        agent = cls(meta["kind"], meta["n_ue"], meta["n_bs"], TrainConfig(**meta["train"]),
                    ExplorationSchedule(**meta["schedule"]))
        for tag, net in (("actor", agent.actor), ("critic", agent.critic),
                         ("actor_target", agent.actor_target), ("critic_target", agent.critic_target)):
            for name, layer in net.named_layers():
                w, b = arrays[f"{tag}/{name}/W"], arrays[f"{tag}/{name}/b"]
                if w.shape != layer.weights.shape:
                    raise ValueError(f"checkpoint shape mismatch at {tag}/{name}")
                layer.weights[...] = w
                layer.bias[...] = b
        for tag, opt, steps in (("actor_opt", agent.actor_opt, meta["actor_opt_steps"]),
                                ("critic_opt", agent.critic_opt, meta["critic_opt_steps"])):
            for i in range(len(opt.first_moment)):
                opt.first_moment[i][...] = arrays[f"{tag}/m/{i}"]
                opt.second_moment[i][...] = arrays[f"{tag}/v/{i}"]
            opt.step_count = steps
        agent.t = meta["t"]
        return agent


def ddpg_update(batch, agent: DDPGAgent, cfg: TrainConfig) -> float:
    """Critic and actor Adam steps on one minibatch, then soft target updates.

    Returns the mean squared Bellman error measured before the critic step.
    """
    s, a, r, s2 = batch
    if len(r) == 0:
        raise ValueError("empty batch")
    y = bellman_targets(r, s2, agent.actor_target, agent.critic_target, cfg.gamma)
    g_c, loss = critic_grads(agent.critic, s, a, y)
    nn.adam_step([agent.critic.flat], [nn.concat_grads(g_c)], agent.critic_opt, cfg.eta_c)
    g_a, _ = actor_grads(agent.actor, agent.critic, s)
    nn.adam_step([agent.actor.flat], [nn.concat_grads(g_a)], agent.actor_opt, cfg.eta_a)
    soft_update([agent.critic.flat], [agent.critic_target.flat], cfg.soft_lambda)
    soft_update([agent.actor.flat], [agent.actor_target.flat], cfg.soft_lambda)
    return loss


def make_variant(kind: str, n_ue: int, n_bs: int, cfg: TrainConfig | None = None,
                 schedule: ExplorationSchedule | None = None, seed: int = 0) -> DDPGAgent:
    return DDPGAgent(kind, n_ue, n_bs, cfg, schedule, seed)
