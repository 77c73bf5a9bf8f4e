import math

import numpy as np

from firewatch.fire_model import IgnitionKernel
from firewatch.learner import DQNConfig
from firewatch.nn import build_q_network, masked_loss_and_grads


class FixedKernel(IgnitionKernel):
    """Kernel returning one constant P for every in-radius neighbour."""

    def __init__(self, p, radius=1):
        super().__init__(radius=radius)
        object.__setattr__(self, "_p", p)

    def probabilities(self, wind, offsets=None):
        offsets = self.offsets() if offsets is None else offsets
        wind = np.asarray(wind, float)
        return np.full(wind.shape[:-1] + (len(offsets),), self._p)


def small_scenario(**changes):
    """20 x 20 scenario (200 m square) small enough for brute-force checks."""
    from dataclasses import replace

    from firewatch.config import AircraftConfig, FireConfig, OutputConfig, PfConfig, ScenarioConfig

    base = ScenarioConfig(
        name="small",
        fire=FireConfig(shape=(20, 20), seed_region=(8, 4, 12, 8), wind=(0.0, 1.0)),
        aircraft=AircraftConfig(start_radius=(40.0, 120.0), min_separation=30.0),
        pf=PfConfig(n_particles=8),
        fire_steps=4,
        seeds=[0],
        output=OutputConfig(snapshot_every=2),
    )
    return replace(base, **changes).validate()


def brute_flown_over(positions, burning, cell_size, radius=40.0):
    """Per-tick loop over every cell and every aircraft."""
    total = 0
    for pos, fire in zip(positions, burning):
        h, w = fire.shape
        for i in range(h):
            for j in range(w):
                cx, cy = (i + 0.5) * cell_size, (j + 0.5) * cell_size
                near = any(((cx - x) ** 2 + (cy - y) ** 2) ** 0.5 <= radius for x, y in pos)
                if fire[i, j] and near:
                    total += 1
    return total


def brute_observed(samples, burning):
    total = 0
    for cells, fire in zip(samples, burning):
        w = fire.shape[1]
        seen = {int(c) for c in cells if c >= 0 and fire[int(c) // w, int(c) % w]}
        total += len(seen)
    return total


def brute_hamming(field, truth, threshold=0.5):
    h, w = truth.shape
    return sum(1 for i in range(h) for j in range(w) if (field[i][j] > threshold) != bool(truth[i][j]))


def brute_wind(est, truth):
    squares = [(float(e) - float(t)) * (float(e) - float(t)) for e, t in zip(est, truth)]
    return math.sqrt(squares[0] + squares[1])


# ---------------------------------------------------------------- network oracles

EPS = 1e-5  # small enough not to straddle ReLU or max-pool kinks
REL_TOL = 1e-4


def rel_err(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


def small_net(seed, image=True):
    rng = np.random.default_rng(seed)
    return build_q_network(
        n_scalars=3,
        image_size=14 if image else None,
        rng=rng,
        scalar_hidden=(4,),
        conv=((2, 3, 2), (3, 2, 1)),
        pool=2,
        head_hidden=5,
        dtype=np.float64,
    )


def random_batch(net, seed, n=3):
    rng = np.random.default_rng(seed + 1000)
    s = rng.normal(size=(n, net.n_scalars))
    img = None if not net.image_layers else rng.normal(size=(n,) + net.image_shape)
    target = rng.normal(size=(n, 2))
    mask = np.zeros((n, 2))
    mask[np.arange(n), rng.integers(0, 2, n)] = 1
    return s, img, target, mask


def finite_difference(net, s, img, target, mask):
    grads = []
    for layer in net.layers:
        g = {}
        for name, p in layer.params.items():
            num = np.zeros_like(p)
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + EPS
                lp, _ = masked_loss_and_grads(net, s, img, target, mask)
                p[idx] = old - EPS
                lm, _ = masked_loss_and_grads(net, s, img, target, mask)
                p[idx] = old
                num[idx] = (lp - lm) / (2 * EPS)
            g[name] = num
        grads.append(g)
    return grads


# ---------------------------------------------------------------- chain MDP oracle

CHAIN = DQNConfig(
    episodes=600,
    gamma=0.8,
    lr=1e-3,
    optimizer="adam",
    target_sync=100,
    learning_starts=100,
    network=dict(scalar_hidden=(), head_hidden=32),
)


def chain_value_iteration(n=5, gamma=0.8, left=0.75, right=1.0):
    q = np.zeros((n, 2))
    for _ in range(500):
        v = q.max(axis=1)
        for s in range(n):
            q[s, 0] = left if s == 0 else gamma * v[s - 1]
            q[s, 1] = right if s == n - 1 else gamma * v[s + 1]
    return q
