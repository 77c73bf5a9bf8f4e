"""Deep Q-learning with experience replay and a periodically synced target network.

Environments expose ``n_agents``, ``reset(seed)`` and ``step(actions)``.
Observations are ``(scalars, image)`` pairs, with ``image`` a boolean array
or ``None``.  Every agent's experience goes into one shared buffer, and a
single network acts for all agents.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from firewatch import nn
from firewatch.nn import Network, build_q_network, masked_loss_and_grads


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperienceTuple:
    scalars: np.ndarray
    image: np.ndarray | None
    action: int
    reward: float
    next_scalars: np.ndarray
    next_image: np.ndarray | None
    terminal: bool

    def __post_init__(self):
        if self.action not in (0, 1):
            raise ValueError("action index must be 0 or 1")


class ReplayBuffer:
    """Fixed-capacity ring of transitions; binary images are stored bit-packed."""

    def __init__(self, capacity: int, n_scalars: int, image_shape=None, rng=None):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.image_shape = None if image_shape is None else tuple(image_shape)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.scalars = np.zeros((capacity, n_scalars), np.float32)
        self.next_scalars = np.zeros((capacity, n_scalars), np.float32)
        self.actions = np.zeros(capacity, np.int8)
        self.rewards = np.zeros(capacity, np.float32)
        self.terminal = np.zeros(capacity, bool)
        if self.image_shape is not None:
            nbytes = (int(np.prod(self.image_shape)) + 7) // 8
            self.images = np.zeros((capacity, nbytes), np.uint8)
            self.next_images = np.zeros((capacity, nbytes), np.uint8)
        self.size = 0
        self._head = 0

    def __len__(self):
        return self.size

    def add(self, t: ExperienceTuple):
        k = self._head
        self.scalars[k] = t.scalars
        self.next_scalars[k] = t.next_scalars
        self.actions[k] = t.action
        self.rewards[k] = t.reward
        self.terminal[k] = t.terminal
        if self.image_shape is not None:
            self.images[k] = np.packbits(np.asarray(t.image, bool).ravel())
            self.next_images[k] = np.packbits(np.asarray(t.next_image, bool).ravel())
        self._head = (k + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _unpack(self, packed):
        n = int(np.prod(self.image_shape))
        bits = np.unpackbits(packed, axis=1, count=n)
        return bits.reshape((len(packed),) + self.image_shape).astype(np.float32)

    def sample_indices(self, batch: int) -> np.ndarray:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return self.rng.integers(0, self.size, batch)

    def sample(self, batch: int) -> dict:
        idx = self.sample_indices(batch)
        out = {
            "scalars": self.scalars[idx],
            "actions": self.actions[idx].astype(np.int64),
            "rewards": self.rewards[idx],
            "next_scalars": self.next_scalars[idx],
            "terminal": self.terminal[idx],
            "images": None,
            "next_images": None,
        }
        if self.image_shape is not None:
            out["images"] = self._unpack(self.images[idx])
            out["next_images"] = self._unpack(self.next_images[idx])
        return out


def q_targets(rewards, next_q, terminal, gamma: float) -> np.ndarray:
    """r + gamma * max_a' Q(s', a') per row, or r alone for terminal rows."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    rewards = np.asarray(rewards, dtype=np.float64)
    best = np.max(np.asarray(next_q, dtype=np.float64), axis=1)
    return np.where(np.asarray(terminal, bool), rewards, rewards + gamma * best)


def q_target(t: ExperienceTuple, target_net: Network, gamma: float) -> float:
    if t.terminal:
        if not 0.0 <= gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        return float(t.reward)
    image = None if t.next_image is None else np.asarray(t.next_image, np.float32)[None]
    next_q = target_net.forward(t.next_scalars, image)
    return float(q_targets([t.reward], next_q, [False], gamma)[0])


class SGD:
    """Plain gradient descent with step decay of the learning rate."""

    def __init__(self, params, lr: float, decay: float = 1.0, decay_every: int = 0):
        self.params, self.lr, self.decay, self.decay_every = params, lr, decay, decay_every
        self.steps = 0

    def current_lr(self) -> float:
        if self.decay_every <= 0:
            return self.lr
        return self.lr * self.decay ** (self.steps // self.decay_every)

    def step(self, grads):
        lr = self.current_lr()
        for p, g in zip(self.params, grads):
            p -= (lr * g).astype(p.dtype)
        self.steps += 1


class Adam:
    def __init__(self, params, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params, self.lr, self.b1, self.b2, self.eps = params, lr, beta1, beta2, eps
        self.m = [np.zeros_like(p, dtype=np.float64) for p in params]
        self.v = [np.zeros_like(p, dtype=np.float64) for p in params]
        self.steps = 0

    def current_lr(self) -> float:
        return self.lr

    def step(self, grads):
        self.steps += 1
        c1 = 1 - self.b1**self.steps
        c2 = 1 - self.b2**self.steps
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.dtype)


@dataclass(frozen=True)
class DQNConfig:
    episodes: int = 200
    gamma: float = 0.99
    lr: float = 1e-4
    optimizer: str = "sgd"  # "sgd" or "adam"
    lr_decay: float = 0.5
    lr_decay_every: int = 0  # updates; 0 disables decay
    batch_size: int = 32
    buffer_capacity: int = 100_000
    target_sync: int = 1000  # updates between target-network copies
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 1.0 / 3.0  # share of episodes spent annealing
    train_every: int = 1  # environment steps per gradient update
    learning_starts: int = 500  # transitions stored before the first update
    network: dict = field(default_factory=dict)  # keyword arguments for build_q_network

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")

    def epsilon(self, episode: int) -> float:
        span = max(1, round(self.eps_fraction * self.episodes))
        frac = min(1.0, episode / span)
        return self.eps_start + frac * (self.eps_end - self.eps_start)


@dataclass
class TrainResult:
    network: Network
    log: list  # rows of (episode, return, loss, epsilon)
    updates: int
    target: Network | None = None


def _select(net: Network, obs, eps: float, rng: np.random.Generator) -> list[int]:
    """Epsilon-greedy action per agent; greedy ties go to action 0."""
    scalars = np.stack([o[0] for o in obs]).astype(np.float32)
    images = None
    if obs[0][1] is not None:
        images = np.stack([np.asarray(o[1], np.float32)[None] for o in obs])
    explore = rng.random(len(obs)) < eps
    random_actions = rng.integers(0, 2, len(obs))
    if explore.all():
        return [int(a) for a in random_actions]
    q = net.forward(scalars, images)
    greedy = (q[:, 1] > q[:, 0]).astype(int)
    return [int(r) if e else int(g) for e, r, g in zip(explore, random_actions, greedy)]


def train(env, config: DQNConfig, seed: int = 0, log_path=None, network: Network | None = None, progress=None) -> TrainResult:
    """Train one shared Q-network on ``env``; deterministic given ``seed``."""
    ss = np.random.SeedSequence(seed)
    init_ss, act_ss, replay_ss, env_ss = ss.spawn(4)
    obs = env.reset(int(env_ss.generate_state(1)[0]))
    n_scalars = len(obs[0][0])
    image = obs[0][1]
    if network is None:
        kw = dict(config.network)
        kw.setdefault("image_size", None if image is None else int(np.shape(image)[-1]))
        net = build_q_network(n_scalars=n_scalars, rng=np.random.default_rng(init_ss), **kw)
    else:
        net = network
    target = net.clone()
    params = net.parameters()
    if config.optimizer == "adam":
        opt = Adam(params, config.lr)
    else:
        opt = SGD(params, config.lr, config.lr_decay, config.lr_decay_every)
    image_shape = None if image is None else (1,) + tuple(np.shape(image))
    buffer = ReplayBuffer(config.buffer_capacity, n_scalars, None if image is None else np.shape(image), np.random.default_rng(replay_ss))
    act_rng = np.random.default_rng(act_ss)
    episode_seeds = np.random.default_rng(env_ss).integers(0, 2**31 - 1, config.episodes)

    log = []
    updates = 0
    steps = 0
    for episode in range(config.episodes):
        eps = config.epsilon(episode)
        obs = env.reset(int(episode_seeds[episode]))
        ep_return, losses, done = 0.0, [], False
        while not done:
            actions = _select(net, obs, eps, act_rng)
            next_obs, rewards, done = env.step(actions)
            for o, a, r, o2 in zip(obs, actions, rewards, next_obs):
                buffer.add(ExperienceTuple(o[0], o[1], a, float(r), o2[0], o2[1], bool(done)))
            ep_return += float(np.sum(rewards))
            obs = next_obs
            steps += 1
            if len(buffer) >= max(config.learning_starts, config.batch_size) and steps % config.train_every == 0:
                batch = buffer.sample(config.batch_size)
                next_img = None if image_shape is None else batch["next_images"].reshape((-1,) + image_shape)
                cur_img = None if image_shape is None else batch["images"].reshape((-1,) + image_shape)
                next_q = target.forward(batch["next_scalars"], next_img)
                y = q_targets(batch["rewards"], next_q, batch["terminal"], config.gamma)
                mask = np.zeros((config.batch_size, 2))
                mask[np.arange(config.batch_size), batch["actions"]] = 1.0
                targets = np.repeat(y[:, None], 2, axis=1)
                loss, grads = masked_loss_and_grads(net, batch["scalars"], cur_img, targets, mask)
                if not math.isfinite(loss) or not all(np.all(np.isfinite(v)) for g in grads for v in g.values()):
                    raise TrainingDiverged(
                        f"non-finite loss {loss} at episode {episode}, update {updates}, lr {opt.current_lr():.3g}"
                    )
                opt.step([g[k] for g in grads for k in g])
                losses.append(loss)
                updates += 1
                if updates % config.target_sync == 0:
                    target.copy_from(net)
        row = (episode, ep_return, float(np.mean(losses)) if losses else float("nan"), eps)
        log.append(row)
        if progress is not None:
            progress(row)
    if log_path is not None:
        write_training_log(log, log_path)
    return TrainResult(net, log, updates, target)


def write_training_log(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["episode", "return", "loss", "epsilon"])
        for ep, ret, loss, eps in rows:
            w.writerow([ep, f"{ret:.6g}", f"{loss:.6g}", f"{eps:.6g}"])


def greedy_actions(net: Network, scalars, images=None) -> np.ndarray:
    q = net.forward(np.asarray(scalars, np.float32), images)
    return (q[:, 1] > q[:, 0]).astype(int)


class ChainMDP:
    """Five-state corridor used to check the learner against value iteration.

    Action 0 moves left, 1 moves right.  Stepping off the left end pays
    ``left_reward`` and stepping off the right end pays ``right_reward``; both
    end the episode.  Episodes start in a uniformly random state, and states are
    one-hot encoded.
    """

    n_agents = 1

    def __init__(self, n_states: int = 5, left_reward: float = 0.75, right_reward: float = 1.0, max_steps: int = 50):
        self.n_states = n_states
        self.left_reward = left_reward
        self.right_reward = right_reward
        self.max_steps = max_steps
        self.state = 0
        self.t = 0
        self.rng = np.random.default_rng(0)

    def encode(self, s: int) -> np.ndarray:
        v = np.zeros(self.n_states, np.float32)
        v[s] = 1.0
        return v

    def reset(self, seed):
        self.rng = np.random.default_rng(seed)
        self.state = int(self.rng.integers(self.n_states))
        self.t = 0
        return [(self.encode(self.state), None)]

    def step(self, actions):
        a = int(actions[0])
        self.t += 1
        nxt = self.state + (1 if a == 1 else -1)
        if nxt < 0:
            return [(self.encode(self.state), None)], [self.left_reward], True
        if nxt >= self.n_states:
            return [(self.encode(self.state), None)], [self.right_reward], True
        self.state = nxt
        return [(self.encode(nxt), None)], [0.0], self.t >= self.max_steps


def save_training(result: TrainResult, weights_path, log_path=None):
    nn.save_weights(result.network, weights_path)
    if log_path is not None:
        write_training_log(result.log, log_path)
