"""Stochastic cellular wildfire with wind-biased ignition.

Grid arrays are indexed ``[i, j]`` where ``i`` runs along world x (north)
and ``j`` along world y (east).  Wind vectors use the same (x, y) axes.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

BURN_RATE = 1
# grids up to this many cells use the single-pass window product
SMALL_GRID = 4096


@dataclass(frozen=True)
class IgnitionKernel:
    """Pairwise ignition probability P(s, s') between a burning cell s' and a cell s.

    P = clip(base_prob * exp(-d / decay_length) * (1 + wind_gain * max(0, w . u)), 0, 1)

    where d is the centre distance in cells, w the wind coefficient vector and
    u the unit vector pointing from s' to s.  P is zero beyond ``radius``.
    """

    radius: int = 3
    base_prob: float = 0.09
    decay_length: float = 1.5
    wind_gain: float = 2.0

    def offsets(self) -> np.ndarray:
        """Integer (di, dj) offsets from s' to s inside the radius, self excluded (read-only)."""
        return _disc_offsets(self.radius)

    def probabilities(self, wind, offsets: np.ndarray | None = None) -> np.ndarray:
        """P for each offset.  ``wind`` may be (2,) or (n, 2); result is (n_off,) or (n, n_off)."""
        wind = np.asarray(wind, dtype=float)
        if offsets is None:
            unit, dist = _disc_geometry(self.radius)
        else:
            dist = np.hypot(offsets[:, 0], offsets[:, 1])
            unit = offsets / dist[:, None]
        base = self.base_prob * np.exp(-dist / self.decay_length)
        along = np.maximum(0.0, wind @ unit.T)
        return np.clip(base * (1.0 + self.wind_gain * along), 0.0, 1.0)

    def pair(self, s, s_src, wind) -> float:
        """P(s, s_src) for two explicit cell indices."""
        di, dj = s[0] - s_src[0], s[1] - s_src[1]
        d2 = di * di + dj * dj
        if d2 == 0 or d2 > self.radius**2:
            return 0.0
        return float(self.probabilities(wind, np.array([[di, dj]]))[0])


@lru_cache(maxsize=None)
def _disc_offsets(r: int) -> np.ndarray:
    di, dj = np.mgrid[-r : r + 1, -r : r + 1]
    di, dj = di.ravel(), dj.ravel()
    d2 = di**2 + dj**2
    keep = (d2 > 0) & (d2 <= r * r)
    out = np.stack([di[keep], dj[keep]], axis=1)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _disc_geometry(r: int) -> tuple[np.ndarray, np.ndarray]:
    offsets = _disc_offsets(r)
    dist = np.hypot(offsets[:, 0], offsets[:, 1])
    unit = offsets / dist[:, None]
    unit.setflags(write=False)
    dist.setflags(write=False)
    return unit, dist


def copy_rng(rng: np.random.Generator) -> np.random.Generator:
    """Independent generator that continues from the same state."""
    bit_gen = type(rng.bit_generator)()
    bit_gen.state = rng.bit_generator.state
    return np.random.Generator(bit_gen)


@dataclass
class FireState:
    fuel: np.ndarray
    burning: np.ndarray
    wind: np.ndarray
    rng: np.random.Generator = field(repr=False)
    step_period: float = 2.5
    cell_size: float = 10.0
    t: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.fuel.shape

    @property
    def width(self) -> int:
        return self.fuel.shape[1]

    @property
    def height(self) -> int:
        return self.fuel.shape[0]

    def copy(self) -> FireState:
        return replace(
            self,
            fuel=self.fuel.copy(),
            burning=self.burning.copy(),
            wind=self.wind.copy(),
            rng=copy_rng(self.rng),
        )


def new_fire_state(
    shape=(100, 100),
    fuel_init: int = 20,
    wind=(0.0, 0.0),
    seed: int | np.random.SeedSequence = 0,
    cell_size: float = 10.0,
    step_period: float = 2.5,
    fuel_map: np.ndarray | None = None,
) -> FireState:
    if fuel_map is not None:
        fuel = np.asarray(fuel_map, dtype=np.int64).copy()
        if fuel.min() < 0:
            raise ValueError("fuel map must be non-negative")
    else:
        fuel = np.full(shape, int(fuel_init), dtype=np.int64)
    return FireState(
        fuel=fuel,
        burning=np.zeros(fuel.shape, dtype=bool),
        wind=np.asarray(wind, dtype=float).copy(),
        rng=np.random.default_rng(seed),
        step_period=step_period,
        cell_size=cell_size,
    )


def seed_fire(state: FireState, region, fuel_init: int | None = None) -> FireState:
    """Set every cell in ``region = (i0, j0, i1, j1)`` (half-open) burning.

    When ``fuel_init`` is given the whole fuel map is reset to that value first.
    """
    i0, j0, i1, j1 = region
    h, w = state.shape
    if not (0 <= i0 < i1 <= h and 0 <= j0 < j1 <= w):
        raise ValueError(f"seed region {region} is empty or outside the {h}x{w} grid")
    new = state.copy()
    if fuel_init is not None:
        new.fuel[:] = int(fuel_init)
    if np.any(new.fuel[i0:i1, j0:j1] <= 0):
        raise ValueError("cannot ignite cells without fuel")
    new.burning[i0:i1, j0:j1] = True
    return new


def shifted_product(field_: np.ndarray, offsets: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Compute prod over offsets of (1 - P_o * field[s - o]) for every cell s.

    ``field_`` is (..., H, W); ``probs`` is (n_off,) or (..., n_off) broadcastable
    against the leading dims.  Cells outside the grid contribute nothing.
    """
    h, w = field_.shape[-2:]
    if field_.ndim == 2 and np.ndim(probs) == 1 and field_.size <= SMALL_GRID:
        return _shifted_product_2d(field_, offsets, probs)
    out = np.ones(field_.shape, dtype=float)
    lead = field_.ndim - 2
    for k, (di, dj) in enumerate(offsets):
        # the source s' = s - (di, dj) must be in the grid
        dst_i = slice(max(di, 0), h + min(di, 0))
        dst_j = slice(max(dj, 0), w + min(dj, 0))
        src_i = slice(max(-di, 0), h + min(-di, 0))
        src_j = slice(max(-dj, 0), w + min(-dj, 0))
        p = probs[..., k]
        if lead:
            p = np.reshape(p, p.shape + (1, 1))
        out[..., dst_i, dst_j] *= 1.0 - p * field_[..., src_i, src_j]
    return out


def _shifted_product_2d(field_: np.ndarray, offsets: np.ndarray, probs: np.ndarray) -> np.ndarray:
    # gather every cell's sources in one indexing pass; off-grid sources read a trailing zero
    h, w = field_.shape
    idx = _source_index(h, w, np.ascontiguousarray(offsets, dtype=np.int64).tobytes(), len(offsets))
    flat = np.zeros(h * w + 1)
    flat[:-1] = field_.ravel()
    return np.prod(1.0 - probs * flat[idx], axis=1).reshape(h, w)


@lru_cache(maxsize=64)
def _source_index(h: int, w: int, offsets_bytes: bytes, n_off: int) -> np.ndarray:
    offsets = np.frombuffer(offsets_bytes, dtype=np.int64).reshape(n_off, 2)
    i, j = np.divmod(np.arange(h * w), w)
    si = i[:, None] - offsets[None, :, 0]
    sj = j[:, None] - offsets[None, :, 1]
    inside = (si >= 0) & (si < h) & (sj >= 0) & (sj < w)
    idx = np.where(inside, si * w + sj, h * w)
    idx.setflags(write=False)
    return idx


def ignition_field(state: FireState, kernel: IgnitionKernel) -> np.ndarray:
    """Per-cell ignition probability for the next step (zero where fuel is exhausted)."""
    offsets = kernel.offsets()
    probs = kernel.probabilities(state.wind)
    survive = shifted_product(state.burning.astype(float), offsets, probs)
    return np.where(state.fuel > 0, 1.0 - survive, 0.0)


def ignition_probability(state: FireState, kernel: IgnitionKernel, s) -> float:
    """Probability that cell ``s = (i, j)`` ignites at the next step."""
    i, j = s
    h, w = state.shape
    if not (0 <= i < h and 0 <= j < w):
        raise IndexError(f"cell {s} outside the {h}x{w} grid")
    if state.fuel[i, j] <= 0:
        return 0.0
    survive = 1.0
    r = kernel.radius
    for si in range(max(0, i - r), min(h, i + r + 1)):
        for sj in range(max(0, j - r), min(w, j + r + 1)):
            if state.burning[si, sj]:
                survive *= 1.0 - kernel.pair((i, j), (si, sj), state.wind)
    return 1.0 - survive


def step_fire(state: FireState, kernel: IgnitionKernel) -> FireState:
    """Advance one fire step.  Ignitions are computed synchronously from the current burning map."""
    p = ignition_field(state, kernel)
    rng = copy_rng(state.rng)
    # one uniform per cell, row-major, every step
    u = rng.random(state.shape)
    ignite = (~state.burning) & (state.fuel > 0) & (u < p)
    fuel = np.where(state.burning, np.maximum(0, state.fuel - BURN_RATE), state.fuel)
    burning = (state.burning & (fuel > 0)) | ignite
    return replace(state, fuel=fuel, burning=burning, wind=state.wind.copy(), rng=rng, t=state.t + 1)


def cell_centers(shape, cell_size: float) -> tuple[np.ndarray, np.ndarray]:
    """World (x, y) coordinates of every cell centre, each of shape ``shape``."""
    h, w = shape
    x = (np.arange(h) + 0.5) * cell_size
    y = (np.arange(w) + 0.5) * cell_size
    return np.meshgrid(x, y, indexing="ij")


def burned_extent(state: FireState, origin: int, fuel_init: int) -> tuple[int, int]:
    """Eastward and westward reach (in cells) of ever-burned cells from column ``origin``."""
    touched = state.burning | (state.fuel < fuel_init)
    cols = np.flatnonzero(touched.any(axis=0))
    if cols.size == 0:
        return 0, 0
    return int(cols.max() - origin), int(origin - cols.min())
