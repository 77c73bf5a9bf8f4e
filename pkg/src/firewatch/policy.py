"""Action selection: DQN inference, random and heuristic baselines, and a receding-horizon planner.

All policies pick one of the two bank increments per control tick.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from firewatch.airframe import BANK_LIMIT, BANK_STEP, AircraftState, BankAction, integrate_arrays, wrap_angle
from firewatch.maps import BeliefMap, cells_within_radius
from firewatch.sensor import CameraRig, ground_points, points_to_cells

SCALAR_SCALE = np.array([1000.0, math.pi, math.pi, BANK_LIMIT, BANK_LIMIT])


@dataclass(frozen=True)
class BeliefWindow:
    """Square body-frame window resampled into the network's belief image."""

    size: int = 64
    extent: float = 1000.0  # metres on a side

    @property
    def resolution(self) -> float:
        return self.extent / self.size


@functools.lru_cache(maxsize=8)
def _window_offsets(size: int, extent: float):
    res = extent / size
    r, c = np.mgrid[0:size, 0:size]
    forward = (size / 2 - 0.5 - r) * res  # row 0 is straight ahead
    right = (c - size / 2 + 0.5) * res  # column 0 is to the left
    return forward, right


def body_window_image(belief: BeliefMap, x: float, y: float, psi: float, cell_size: float, window=BeliefWindow()) -> np.ndarray:
    """Nearest-neighbour resample of the thresholded belief, heading up; off-map reads 0."""
    forward, right = _window_offsets(window.size, window.extent)
    c, s = math.cos(psi), math.sin(psi)
    wx = x + forward * c - right * s
    wy = y + forward * s + right * c
    i = np.floor(wx / cell_size).astype(np.int64)
    j = np.floor(wy / cell_size).astype(np.int64)
    h, w = belief.shape
    inside = (i >= 0) & (i < h) & (j >= 0) & (j < w)
    img = np.zeros((window.size, window.size), dtype=np.float32)
    img[inside] = belief.binary[i[inside], j[inside]]
    return img


@dataclass(frozen=True)
class RelativeState:
    """Aircraft-centric encoding seen by the Q-network.

    ``theta_r`` is the bearing to the other aircraft measured counterclockwise
    from own heading, so a target on the right has negative bearing.
    ``psi_r`` is the other heading minus own heading.
    """

    rho: float
    theta_r: float
    psi_r: float
    phi0: float
    phi1: float
    belief_r: np.ndarray

    def scalars(self) -> np.ndarray:
        raw = np.array([self.rho, self.theta_r, self.psi_r, self.phi0, self.phi1])
        return (raw / SCALAR_SCALE).astype(np.float32)

    def image(self) -> np.ndarray:
        return self.belief_r[None].astype(np.float32)


def build_relative_state(
    own: AircraftState,
    other: AircraftState,
    belief: BeliefMap,
    cell_size: float = 10.0,
    window: BeliefWindow = BeliefWindow(),
) -> RelativeState:
    dx, dy = other.x - own.x, other.y - own.y
    rho = math.hypot(dx, dy)
    theta = 0.0 if rho == 0.0 else wrap_angle(own.psi - math.atan2(dy, dx))
    return RelativeState(
        rho=rho,
        theta_r=theta,
        psi_r=wrap_angle(other.psi - own.psi),
        phi0=own.phi,
        phi1=other.phi,
        belief_r=body_window_image(belief, own.x, own.y, own.psi, cell_size, window),
    )


@dataclass(frozen=True)
class RewardWeights:
    new_fire: float = 1.0
    proximity: float = -50.0
    proximity_full: float = 40.0  # full penalty inside this separation (m)
    proximity_cutoff: float = 60.0  # no penalty beyond this separation (m)
    overfire: float = -0.5
    overfire_radius: float = 40.0

    def __post_init__(self):
        if self.new_fire <= 0:
            raise ValueError("new-fire weight must be positive")
        if self.proximity > 0 or self.overfire > 0:
            raise ValueError("penalty weights must be non-positive")
        if not 0 <= self.proximity_full <= self.proximity_cutoff:
            raise ValueError("need 0 <= proximity_full <= proximity_cutoff")


def proximity_ramp(rho, full: float, cutoff: float):
    """1 inside ``full``, 0 beyond ``cutoff``, linear in between."""
    rho = np.asarray(rho, dtype=float)
    if cutoff == full:
        return (rho < cutoff).astype(float)
    return np.clip((cutoff - rho) / (cutoff - full), 0.0, 1.0)


@dataclass(frozen=True)
class RewardTerms:
    new_fire: float
    proximity: float
    overfire: float

    @property
    def total(self) -> float:
        return self.new_fire + self.proximity + self.overfire


def reward_terms(
    prev_belief: BeliefMap,
    new_belief: BeliefMap,
    own: AircraftState,
    other: AircraftState,
    burning: np.ndarray,
    weights: RewardWeights,
    cell_size: float = 10.0,
) -> RewardTerms:
    newly = int(np.count_nonzero(new_belief.binary & ~prev_belief.binary))
    rho = math.hypot(other.x - own.x, other.y - own.y)
    ramp = float(proximity_ramp(rho, weights.proximity_full, weights.proximity_cutoff))
    near = cells_within_radius(own.x, own.y, weights.overfire_radius, burning.shape, cell_size)
    under = int(np.count_nonzero(burning.ravel()[near]))
    return RewardTerms(weights.new_fire * newly, weights.proximity * ramp, weights.overfire * under)


def reward(prev_belief, new_belief, own, other, fire, weights: RewardWeights) -> float:
    """Scalar reward for one aircraft over one control tick."""
    return reward_terms(prev_belief, new_belief, own, other, fire.burning, weights, fire.cell_size).total


def greedy(q) -> BankAction:
    """Argmax over the two outputs; a tie picks the lower bank."""
    q = np.asarray(q).ravel()
    return BankAction.INCREASE if q[1] > q[0] else BankAction.DECREASE


def q_values(state: RelativeState, network) -> np.ndarray:
    return network.forward(state.scalars(), state.image())[0]


def dqn_action(state: RelativeState, network) -> BankAction:
    return greedy(q_values(state, network))


def baseline_random(rng: np.random.Generator) -> BankAction:
    return BankAction(int(rng.integers(2)))


class RandomPolicy:
    """Seeded stream of uniformly random actions."""

    def __init__(self, seed):
        self.rng = np.random.default_rng(seed)

    def __call__(self, *_args) -> BankAction:
        return baseline_random(self.rng)


def _toward_bank(own: AircraftState, desired: float) -> BankAction:
    return BankAction.INCREASE if desired > own.phi_cmd + 1e-12 else BankAction.DECREASE


def bearing_error(own: AircraftState, tx: float, ty: float) -> float:
    """Clockwise angle from own heading to the point (tx, ty)."""
    return wrap_angle(math.atan2(ty - own.y, tx - own.x) - own.psi)


def frontier_mask(fire: np.ndarray) -> np.ndarray:
    """Believed-burning cells with at least one 4-neighbour that is not (map edges count)."""
    pad = np.pad(fire, 1, constant_values=False)
    all_neighbours = pad[:-2, 1:-1] & pad[2:, 1:-1] & pad[1:-1, :-2] & pad[1:-1, 2:]
    return fire & ~all_neighbours


def baseline_heuristic(
    own: AircraftState,
    belief: BeliefMap,
    cell_size: float = 10.0,
    standoff: float = 120.0,
    gain: float = 1.0,
) -> BankAction:
    """Fly to the nearest believed frontier cell, then circle the fire.

    The desired bank is proportional to the bearing error (clipped to the bank
    limit).  Within ``standoff`` of the frontier the aircraft holds maximum bank
    toward the side of the fire centroid.  With an empty belief it heads for the
    map centre.
    """
    fire = belief.binary
    h, w = fire.shape
    if not fire.any():
        err = bearing_error(own, h * cell_size / 2, w * cell_size / 2)
        return _toward_bank(own, float(np.clip(gain * err, -BANK_LIMIT, BANK_LIMIT)))
    fi, fj = np.nonzero(frontier_mask(fire))
    fx, fy = (fi + 0.5) * cell_size, (fj + 0.5) * cell_size
    d2 = (fx - own.x) ** 2 + (fy - own.y) ** 2
    k = int(np.argmin(d2))
    if math.sqrt(d2[k]) < standoff:
        ci, cj = np.nonzero(fire)
        side = bearing_error(own, (ci.mean() + 0.5) * cell_size, (cj.mean() + 0.5) * cell_size)
        # pushing against the limit holds the bank there
        return BankAction.INCREASE if side > 0 else BankAction.DECREASE
    err = bearing_error(own, fx[k], fy[k])
    return _toward_bank(own, float(np.clip(gain * err, -BANK_LIMIT, BANK_LIMIT)))


# ---------------------------------------------------------------- planning


def coordinate_descent(objective, horizon: int, restarts: int, rng: np.random.Generator, max_sweeps: int = 50):
    """Maximise ``objective`` over binary sequences by single-flip coordinate descent.

    ``objective`` maps an (n, horizon) int array to n scores.  Every restart
    sweeps positions in order, keeping a flip when it strictly improves, until a
    full sweep changes nothing.  Returns the best (sequence, score).
    """
    seqs = rng.integers(0, 2, (restarts, horizon))
    vals = np.asarray(objective(seqs), dtype=float)
    active = np.ones(restarts, dtype=bool)
    for _ in range(max_sweeps):
        improved = np.zeros(restarts, dtype=bool)
        for t in range(horizon):
            idx = np.flatnonzero(active)
            cand = seqs[idx].copy()
            cand[:, t] ^= 1
            cv = np.asarray(objective(cand), dtype=float)
            better = cv > vals[idx]
            seqs[idx[better]] = cand[better]
            vals[idx[better]] = cv[better]
            improved[idx[better]] = True
        active = improved
        if not active.any():
            break
    best = int(np.argmax(vals))
    return seqs[best].copy(), float(vals[best])


def exhaustive_search(objective, horizon: int):
    """Evaluate all 2**horizon sequences; returns the best (sequence, score)."""
    codes = np.arange(2**horizon)
    seqs = (codes[:, None] >> np.arange(horizon - 1, -1, -1)) & 1
    vals = np.asarray(objective(seqs), dtype=float)
    best = int(np.argmax(vals))
    return seqs[best], float(vals[best])


@dataclass(frozen=True)
class PlannerConfig:
    horizon: int = 25
    execute: int = 5
    restarts: int = 16
    dt: float = 0.1
    samples_u: int = 6
    samples_v: int = 4
    max_sweeps: int = 50

    def __post_init__(self):
        if not self.horizon > self.execute >= 1:
            raise ValueError("need horizon > execute >= 1")


def rollout(own: AircraftState, seqs: np.ndarray, dt: float = 0.1):
    """Fly every action sequence from ``own``; returns x, y, psi, phi arrays of shape (n, T)."""
    seqs = np.asarray(seqs)
    n, horizon = seqs.shape
    x = np.full(n, own.x)
    y = np.full(n, own.y)
    psi = np.full(n, own.psi)
    phi = np.full(n, own.phi_cmd)
    out = np.empty((4, n, horizon))
    for t in range(horizon):
        phi = np.clip(phi + np.where(seqs[:, t] == 1, BANK_STEP, -BANK_STEP), -BANK_LIMIT, BANK_LIMIT)
        x, y, psi = integrate_arrays(x, y, psi, phi, own.v, dt)
        out[:, :, t] = x, y, psi, phi
    return out


def _hold(other: AircraftState, horizon: int, dt: float):
    """Positions (2, T) of the other aircraft holding its bank command."""
    x, y, psi = np.array([other.x]), np.array([other.y]), np.array([other.psi])
    out = np.empty((2, horizon))
    for t in range(horizon):
        x, y, psi = integrate_arrays(x, y, psi, other.phi_cmd, other.v, dt)
        out[:, t] = x[0], y[0]
    return out


def _distinct_positive(cells: np.ndarray) -> np.ndarray:
    """Per row, the number of distinct non-negative entries."""
    s = np.sort(cells, axis=1)
    fresh = np.ones(s.shape, dtype=bool)
    fresh[:, 1:] = s[:, 1:] != s[:, :-1]
    return np.count_nonzero(fresh & (s >= 0), axis=1)


def _overfire_counts(fire: np.ndarray, x: np.ndarray, y: np.ndarray, radius: float, cell_size: float) -> np.ndarray:
    h, w = fire.shape
    reach = int(math.ceil(radius / cell_size)) + 1
    di, dj = np.mgrid[-reach : reach + 1, -reach : reach + 1]
    ci = np.floor(x / cell_size).astype(np.int64)[..., None] + di.ravel()
    cj = np.floor(y / cell_size).astype(np.int64)[..., None] + dj.ravel()
    d2 = ((ci + 0.5) * cell_size - x[..., None]) ** 2 + ((cj + 0.5) * cell_size - y[..., None]) ** 2
    inside = (ci >= 0) & (ci < h) & (cj >= 0) & (cj < w) & (d2 <= radius * radius)
    hit = np.where(inside, fire[np.clip(ci, 0, h - 1), np.clip(cj, 0, w - 1)], False)
    return hit.sum(axis=-1)


def plan_objective(
    own: AircraftState,
    other: AircraftState,
    fire: np.ndarray,
    weights: RewardWeights,
    rig: CameraRig,
    cell_size: float,
    config: PlannerConfig,
):
    """Build the batched surrogate reward used by the planner.

    Score = new-fire weight x distinct predicted-fire cells seen along the
    trajectory, plus the proximity and overfire penalties summed over the
    horizon, with the other aircraft holding its bank.
    """
    dirs = rig.body_directions(config.samples_u, config.samples_v).reshape(-1, 3)
    flat_fire = fire.ravel()
    ox, oy = _hold(other, config.horizon, config.dt)

    def objective(seqs):
        x, y, psi, phi = rollout(own, seqs, config.dt)
        pts, valid = ground_points(x, y, psi, phi, own.h, dirs, rig.max_range, rig.slant_range)
        cells = points_to_cells(pts, valid, fire.shape, cell_size)
        seen = np.where((cells >= 0) & flat_fire[np.maximum(cells, 0)], cells, -1)
        score = weights.new_fire * _distinct_positive(seen.reshape(len(seqs), -1))
        rho = np.hypot(x - ox, y - oy)
        ramp = proximity_ramp(rho, weights.proximity_full, weights.proximity_cutoff)
        score = score + weights.proximity * ramp.sum(axis=1)
        if weights.overfire != 0:
            score = score + weights.overfire * _overfire_counts(fire, x, y, weights.overfire_radius, cell_size).sum(axis=1)
        return score

    return objective


def receding_horizon(
    own: AircraftState,
    other: AircraftState,
    predicted_fire: np.ndarray,
    weights: RewardWeights,
    rng: np.random.Generator,
    config: PlannerConfig = PlannerConfig(),
    rig: CameraRig | None = None,
    cell_size: float = 10.0,
) -> list[BankAction]:
    """Plan ``config.horizon`` ticks ahead and return the first ``config.execute`` actions."""
    rig = rig or CameraRig()
    objective = plan_objective(own, other, np.asarray(predicted_fire, bool), weights, rig, cell_size, config)
    seq, _ = coordinate_descent(objective, config.horizon, config.restarts, rng, config.max_sweeps)
    return [BankAction(int(a)) for a in seq[: config.execute]]
