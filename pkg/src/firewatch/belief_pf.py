"""Particle filter over probabilistic wildfire models with per-particle wind.

Each particle carries a burn-probability field, a categorical fuel
distribution per cell over levels 0..k_max, a wind coefficient vector and an
accumulated log-likelihood.  The ensemble stores them stacked so propagation
and weighting run over all particles at once.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from firewatch.fire_model import IgnitionKernel, shifted_product
from firewatch.maps import BeliefMap

NORM_TOL = 1e-9


class FilterDivergence(RuntimeError):
    pass


@dataclass(frozen=True)
class Particle:
    burn: np.ndarray  # (H, W)
    fuel: np.ndarray  # (K+1, H, W)
    wind: np.ndarray  # (2,)
    log_like: float = 0.0


@dataclass(frozen=True)
class ParticleEnsemble:
    burn: np.ndarray  # (P, H, W)
    fuel: np.ndarray  # (P, K+1, H, W)
    wind: np.ndarray  # (P, 2)
    log_like: np.ndarray  # (P,)
    obs_correct_prob: float = 0.8
    resample_interval: int = 20
    wind_noise_sigma: float = 0.05
    steps_since_resample: int = 0

    @property
    def n_particles(self) -> int:
        return self.burn.shape[0]

    @property
    def shape(self):
        return self.burn.shape[1:]

    @property
    def k_max(self) -> int:
        return self.fuel.shape[1] - 1

    def particle(self, i: int) -> Particle:
        return Particle(self.burn[i], self.fuel[i], self.wind[i], float(self.log_like[i]))

    @classmethod
    def from_particles(cls, particles, **kw) -> ParticleEnsemble:
        return cls(
            burn=np.stack([p.burn for p in particles]).astype(float),
            fuel=np.stack([p.fuel for p in particles]).astype(float),
            wind=np.stack([np.asarray(p.wind, float) for p in particles]),
            log_like=np.array([p.log_like for p in particles], dtype=float),
            **kw,
        )

    def weights(self) -> np.ndarray:
        return normalized_weights(self.log_like)


def normalized_weights(log_like: np.ndarray) -> np.ndarray:
    log_like = np.asarray(log_like, dtype=float)
    top = np.max(log_like)
    if not np.isfinite(top):
        raise FilterDivergence("every particle has zero likelihood")
    w = np.exp(log_like - top)
    return w / w.sum()


def init_ensemble(
    shape,
    seed_region,
    rng: np.random.Generator,
    n_particles: int = 40,
    k_max: int = 20,
    seed_burn: float = 0.9,
    background_burn: float = 0.0,
    wind_prior_sigma: float = 0.5,
    wind_prior_mean=(0.0, 0.0),
    fuel_min: int = 1,
    **kw,
) -> ParticleEnsemble:
    """High burn probability over the seed rectangle, Gaussian winds.

    Fuel is uniform over levels ``fuel_min..k_max``; the default excludes the
    exhausted level so unburnt land can always ignite.
    """
    h, w = shape
    burn = np.full((n_particles, h, w), background_burn)
    i0, j0, i1, j1 = seed_region
    burn[:, i0:i1, j0:j1] = seed_burn
    fuel = np.zeros((n_particles, k_max + 1, h, w))
    fuel[:, fuel_min:] = 1.0 / (k_max + 1 - fuel_min)
    wind = np.asarray(wind_prior_mean, float) + wind_prior_sigma * rng.standard_normal((n_particles, 2))
    return ParticleEnsemble(burn, fuel, wind, np.zeros(n_particles), **kw)


def _active_window(burn: np.ndarray, margin: int):
    """Bounding slices of cells with any burn mass, grown by ``margin``; None if all zero."""
    rows = np.flatnonzero(burn.any(axis=(0, 2)))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(burn.any(axis=(0, 1)))
    h, w = burn.shape[-2:]
    return (
        slice(max(rows[0] - margin, 0), min(rows[-1] + margin + 1, h)),
        slice(max(cols[0] - margin, 0), min(cols[-1] + margin + 1, w)),
    )


def _propagate_fields(burn: np.ndarray, fuel: np.ndarray, wind: np.ndarray, kernel: IgnitionKernel):
    # cells with zero burn mass in and around them are fixed points of the update,
    # so the work is confined to the window that can change
    win = _active_window(burn, kernel.radius)
    if win is None:
        return burn.copy(), fuel.copy()
    rows, cols = win
    new_burn, new_fuel = burn.copy(), fuel.copy()
    b_win, f_win = _propagate_window(burn[:, rows, cols], fuel[:, :, rows, cols], wind, kernel)
    new_burn[:, rows, cols] = b_win
    new_fuel[:, :, rows, cols] = f_win
    return new_burn, new_fuel


def _propagate_window(burn: np.ndarray, fuel: np.ndarray, wind: np.ndarray, kernel: IgnitionKernel):
    offsets = kernel.offsets()
    probs = kernel.probabilities(wind, offsets)  # (P, n_off)
    # a burning cell moves each level's mass one level down; mass is conserved
    outflow = fuel[:, 1:] * burn[:, None]
    new_fuel = fuel.copy()
    new_fuel[:, 1:] -= outflow
    new_fuel[:, :-1] += outflow
    total = new_fuel.sum(axis=1, keepdims=True)
    if np.abs(total - 1.0).max() > NORM_TOL * 1e-3:
        new_fuel /= total
    ignite = 1.0 - shifted_product(burn, offsets, probs)
    # exhausted fuel after this step extinguishes the cell
    new_burn = (1.0 - new_fuel[:, 0]) * ((1.0 - burn) * ignite + burn)
    return np.clip(new_burn, 0.0, 1.0), new_fuel


def propagate(ens: ParticleEnsemble, kernel: IgnitionKernel, rng: np.random.Generator) -> ParticleEnsemble:
    """One fire step for every particle, then a Gaussian random walk on the winds."""
    burn, fuel = _propagate_fields(ens.burn, ens.fuel, ens.wind, kernel)
    wind = ens.wind + ens.wind_noise_sigma * rng.standard_normal(ens.wind.shape)
    return replace(ens, burn=burn, fuel=fuel, wind=wind)


def propagate_particle(p: Particle, kernel: IgnitionKernel, rng: np.random.Generator, wind_noise_sigma: float = 0.05) -> Particle:
    burn, fuel = _propagate_fields(p.burn[None], p.fuel[None], np.asarray(p.wind, float)[None], kernel)
    wind = np.asarray(p.wind, float) + wind_noise_sigma * rng.standard_normal(2)
    return Particle(burn[0], fuel[0], wind, p.log_like)


def observation_likelihood(b, o, correct: float = 0.8):
    """p(o | b) with a symmetric sensor that reports correctly with probability ``correct``."""
    b = np.asarray(b, dtype=float)
    o = np.asarray(o, dtype=bool)
    # affine in b: (1 - c) + (2c - 1) b for a positive report, c + (1 - 2c) b for a negative one
    slope = np.where(o, 2 * correct - 1, 1 - 2 * correct)
    intercept = np.where(o, 1 - correct, correct)
    return intercept + slope * b


def weight_update(ens: ParticleEnsemble, cells, obs) -> ParticleEnsemble:
    """Add sum_i log p(o_i | particle) to every particle's log-likelihood.

    Every sample in the batch is scored against the burn field as it stands
    on entry.
    """
    cells = np.asarray(cells, dtype=np.int64)
    if cells.size == 0:
        return ens
    flat = ens.burn.reshape(ens.n_particles, -1)
    lik = observation_likelihood(flat[:, cells], np.asarray(obs, bool)[None, :], ens.obs_correct_prob)
    return replace(ens, log_like=ens.log_like + np.log(lik, out=lik).sum(axis=1))


def _posterior(b, n_pos, n_neg, correct: float):
    # sequential Bayes with n_pos positive and n_neg negative reports, in closed form
    log_ratio = np.clip((n_neg - n_pos) * np.log(correct / (1 - correct)), -700.0, 700.0)
    odds_factor = np.exp(log_ratio)
    # the factor is finite and positive, so b = 0 and b = 1 map to themselves
    b = np.asarray(b, dtype=float)
    denom = 1.0 - b
    denom *= odds_factor
    denom += b
    return b / denom


def bayes_cell_update(p: Particle, cell, o: bool, correct: float = 0.8) -> Particle:
    """Posterior burn probability of one cell ``(i, j)`` after observation ``o``."""
    burn = p.burn.copy()
    b = burn[cell]
    burn[cell] = _posterior(b, int(bool(o)), int(not o), correct)
    return replace(p, burn=burn)


def bayes_update(ens: ParticleEnsemble, cells, obs) -> ParticleEnsemble:
    """Apply every observation sample to every particle's burn field.

    Repeated samples of one cell compose exactly as sequential Bayes updates.
    """
    cells = np.asarray(cells, dtype=np.int64)
    if cells.size == 0:
        return ens
    obs = np.asarray(obs, dtype=bool)
    n_cells = int(np.prod(ens.shape))
    n_pos = np.bincount(cells[obs], minlength=n_cells)
    n_neg = np.bincount(cells[~obs], minlength=n_cells)
    touched = np.flatnonzero(n_pos + n_neg)
    flat = ens.burn.reshape(ens.n_particles, -1)
    if touched.size == n_cells:
        flat = _posterior(flat, n_pos, n_neg, ens.obs_correct_prob)
    else:
        flat = flat.copy()
        flat[:, touched] = _posterior(flat[:, touched], n_pos[touched], n_neg[touched], ens.obs_correct_prob)
    return replace(ens, burn=flat.reshape(ens.burn.shape))


def systematic_indices(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = len(weights)
    positions = (rng.random() + np.arange(n)) / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions, side="right")


def resample(ens: ParticleEnsemble, rng: np.random.Generator) -> ParticleEnsemble:
    """Systematic resampling proportional to normalised likelihood; weights reset to uniform."""
    idx = systematic_indices(ens.weights(), rng)
    return replace(
        ens,
        burn=ens.burn[idx],
        fuel=ens.fuel[idx],
        wind=ens.wind[idx].copy(),
        log_like=np.zeros(ens.n_particles),
        steps_since_resample=0,
    )


def advance(ens: ParticleEnsemble, kernel: IgnitionKernel, rng: np.random.Generator) -> ParticleEnsemble:
    """Propagate one fire step and resample once ``resample_interval`` steps have elapsed."""
    ens = propagate(ens, kernel, rng)
    ens = replace(ens, steps_since_resample=ens.steps_since_resample + 1)
    if ens.steps_since_resample >= ens.resample_interval:
        ens = resample(ens, rng)
    return ens


@dataclass(frozen=True)
class PfEstimate:
    belief: BeliefMap
    wind: np.ndarray
    fuel_mean: np.ndarray
    weights: np.ndarray


def estimate(ens: ParticleEnsemble, threshold: float = 0.5) -> PfEstimate:
    w = ens.weights()
    burn = np.tensordot(w, ens.burn, axes=1)
    levels = np.arange(ens.k_max + 1, dtype=float)
    fuel_mean = np.tensordot(w, np.tensordot(levels, ens.fuel, axes=([0], [1])), axes=1)
    return PfEstimate(
        belief=BeliefMap(np.clip(burn, 0.0, 1.0), threshold),
        wind=w @ ens.wind,
        fuel_mean=fuel_mean,
        weights=w,
    )


def burn_estimate(ens: ParticleEnsemble, threshold: float = 0.5) -> BeliefMap:
    """Weighted burn field only; cheaper than :func:`estimate`."""
    return BeliefMap(np.clip(np.tensordot(ens.weights(), ens.burn, axes=1), 0.0, 1.0), threshold)
