"""Body-mounted pinhole cameras projected onto a flat ground plane.

Frames: world is north-east-down; the body frame has x out the nose, y out
the right wing and z down; camera frames have x, y in the image plane and z
along the optical axis.  Image coordinates ``(u, v)`` are in millimetres on
the sensor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from firewatch.airframe import AircraftState
from firewatch.fire_model import FireState

OUT_OF_RANGE = -1


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class CameraRig:
    focal_length: float = 50.0
    sensor_width: float = 36.0
    sensor_height: float = 24.0
    theta_c: float = math.radians(30.0)
    phi_c_list: tuple = tuple(math.radians(a) for a in (-40.0, -13.0, 13.0, 40.0))
    max_range: float = 300.0
    samples_u: int = 30
    samples_v: int = 20
    slant_range: bool = False
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        if len(self.phi_c_list) != 4:
            raise ValueError("the rig carries exactly four cameras")

    def pixel_grid(self, samples_u: int | None = None, samples_v: int | None = None):
        """Sample coordinates (u, v), row-major over v then u, covering the full sensor."""
        nu = samples_u or self.samples_u
        nv = samples_v or self.samples_v
        u = np.linspace(-self.sensor_width / 2, self.sensor_width / 2, nu)
        v = np.linspace(-self.sensor_height / 2, self.sensor_height / 2, nv)
        vv, uu = np.meshgrid(v, u, indexing="ij")
        return uu.ravel(), vv.ravel()

    def camera_to_body(self, camera_id: int) -> np.ndarray:
        return rot_y(self.theta_c) @ rot_x(self.phi_c_list[camera_id])

    def body_directions(self, samples_u: int | None = None, samples_v: int | None = None) -> np.ndarray:
        """Ray directions in the body frame, shape (4, S, 3)."""
        key = (samples_u, samples_v)
        if key not in self._cache:
            uu, vv = self.pixel_grid(samples_u, samples_v)
            pc = np.stack([uu, vv, np.full_like(uu, self.focal_length)], axis=1)
            self._cache[key] = np.stack([pc @ self.camera_to_body(k).T for k in range(4)])
        return self._cache[key]


def camera_to_world(p_c, psi: float, phi: float, theta_c: float, phi_c: float) -> np.ndarray:
    """Rotate a camera-frame vector into the world frame (pitch is zero)."""
    r = rot_z(psi) @ rot_x(phi) @ rot_y(theta_c) @ rot_x(phi_c)
    return r @ np.asarray(p_c, dtype=float)


def body_to_world(dirs: np.ndarray, psi, phi) -> np.ndarray:
    """Apply R_z(psi) R_x(phi) to body vectors ``dirs`` (..., 3) with broadcast angles."""
    psi = np.asarray(psi, dtype=float)[..., None]
    phi = np.asarray(phi, dtype=float)[..., None]
    dx, dy, dz = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    cf, sf = np.cos(phi), np.sin(phi)
    y1 = cf * dy - sf * dz
    z1 = sf * dy + cf * dz
    cp, sp = np.cos(psi), np.sin(psi)
    return np.stack(np.broadcast_arrays(cp * dx - sp * y1, sp * dx + cp * y1, z1), axis=-1)


def ground_points(x, y, psi, phi, h, dirs_body: np.ndarray, max_range: float, slant: bool = False):
    """Intersect body-frame rays with the ground.

    ``x, y, psi, phi`` broadcast to a batch shape B; ``dirs_body`` is (S, 3).
    Returns ground (x, y) of shape B + (S, 2) and a validity mask B + (S,).
    """
    x = np.asarray(x, dtype=float)[..., None]
    y = np.asarray(y, dtype=float)[..., None]
    d = body_to_world(dirs_body, psi, phi)
    dz = d[..., 2]
    down = dz > 1e-12
    t = np.where(down, h / np.where(down, dz, 1.0), np.inf)
    # rays that never reach the ground have t = inf; their inf * 0 products are masked below
    with np.errstate(invalid="ignore"):
        gx = x + t * d[..., 0]
        gy = y + t * d[..., 1]
        if slant:
            dist = t * np.linalg.norm(d, axis=-1)
        else:
            dist = t * np.hypot(d[..., 0], d[..., 1])
    valid = down & (dist <= max_range)
    pts = np.stack([np.where(valid, gx, np.nan), np.where(valid, gy, np.nan)], axis=-1)
    return pts, valid


def points_to_cells(pts: np.ndarray, valid: np.ndarray, shape, cell_size: float) -> np.ndarray:
    """Flat cell index of the cell containing each point, OUT_OF_RANGE if off-grid."""
    h, w = shape
    with np.errstate(invalid="ignore"):
        i = np.floor(pts[..., 0] / cell_size)
        j = np.floor(pts[..., 1] / cell_size)
        inside = valid & (i >= 0) & (i < h) & (j >= 0) & (j < w)
    flat = np.where(inside, np.nan_to_num(i) * w + np.nan_to_num(j), OUT_OF_RANGE)
    return flat.astype(np.int64)


def _check_pixel(rig: CameraRig, u: float, v: float):
    tol = 1e-9
    if abs(u) > rig.sensor_width / 2 + tol or abs(v) > rig.sensor_height / 2 + tol:
        raise ValueError(f"pixel ({u}, {v}) mm lies outside the sensor")


def pixel_to_ground_point(state: AircraftState, rig: CameraRig, camera_id: int, u: float, v: float):
    """Ground (x, y) seen through pixel (u, v), or None when out of range."""
    _check_pixel(rig, u, v)
    d_body = rig.camera_to_body(camera_id) @ np.array([u, v, rig.focal_length])
    pts, valid = ground_points(state.x, state.y, state.psi, state.phi, state.h, d_body[None, :], rig.max_range, rig.slant_range)
    if not valid[0]:
        return None
    return pts[0]


def pixel_to_ground(
    state: AircraftState,
    rig: CameraRig,
    camera_id: int,
    u: float,
    v: float,
    shape=(100, 100),
    cell_size: float = 10.0,
):
    """Grid cell ``(i, j)`` seen through pixel (u, v), or None when out of range or off the grid."""
    pt = pixel_to_ground_point(state, rig, camera_id, u, v)
    if pt is None:
        return None
    flat = points_to_cells(pt[None, :], np.array([True]), shape, cell_size)[0]
    if flat == OUT_OF_RANGE:
        return None
    return divmod(int(flat), shape[1])


def ground_to_pixel(state: AircraftState, rig: CameraRig, camera_id: int, point) -> tuple[float, float]:
    """Pinhole projection of a ground point (x, y, 0) into camera ``camera_id``."""
    r = rot_z(state.psi) @ rot_x(state.phi) @ rig.camera_to_body(camera_id)
    rel = np.array([point[0] - state.x, point[1] - state.y, state.h])
    xc, yc, zc = r.T @ rel
    return rig.focal_length * xc / zc, rig.focal_length * yc / zc


@dataclass
class ObservationImage:
    camera_id: int
    cells: np.ndarray  # flat cell index per sample, OUT_OF_RANGE when nothing is seen
    observed: np.ndarray  # post-noise burning flag per sample
    truth: np.ndarray  # pre-noise burning flag, kept for metrics
    timestamp: float = 0.0

    @property
    def in_range(self) -> np.ndarray:
        return self.cells != OUT_OF_RANGE

    def samples(self) -> tuple[np.ndarray, np.ndarray]:
        """In-range (cell, observed) pairs in sample order."""
        m = self.in_range
        return self.cells[m], self.observed[m]


def footprint_cells(state: AircraftState, rig: CameraRig, shape, cell_size: float) -> np.ndarray:
    """Flat cell index for every sample of every camera, shape (4, S)."""
    dirs = rig.body_directions()
    pts, valid = ground_points(state.x, state.y, state.psi, state.phi, state.h, dirs, rig.max_range, rig.slant_range)
    return points_to_cells(pts, valid, shape, cell_size)


def observe(
    state: AircraftState,
    fire: FireState,
    rig: CameraRig,
    error_rate: float,
    rng: np.random.Generator,
    timestamp: float = 0.0,
) -> list[ObservationImage]:
    """Sample the true burning map under each camera and flip each sample with ``error_rate``."""
    if not 0.0 <= error_rate <= 1.0:
        raise ValueError("error_rate must lie in [0, 1]")
    cells = footprint_cells(state, rig, fire.shape, fire.cell_size)
    burning = fire.burning.ravel()
    truth = np.where(cells != OUT_OF_RANGE, burning[np.maximum(cells, 0)], False)
    flips = rng.random(cells.shape) < error_rate
    observed = np.where(cells != OUT_OF_RANGE, truth ^ flips, False)
    return [ObservationImage(k, cells[k], observed[k], truth[k], timestamp) for k in range(4)]


def footprint_area(state: AircraftState, rig: CameraRig, samples: int = 60) -> float:
    """Total in-range ground area of the four camera footprints (m^2), by sample-cell quadrature."""
    dirs = rig.body_directions(samples, samples)
    pts, valid = ground_points(state.x, state.y, state.psi, state.phi, state.h, dirs, rig.max_range, rig.slant_range)
    total = 0.0
    for k in range(4):
        g = pts[k].reshape(samples, samples, 2)
        m = valid[k].reshape(samples, samples)
        a = g[1:, :-1] - g[:-1, :-1]
        b = g[:-1, 1:] - g[:-1, :-1]
        quad = np.abs(a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0])
        ok = m[1:, :-1] & m[:-1, 1:] & m[:-1, :-1] & m[1:, 1:]
        total += float(np.sum(np.where(ok, quad, 0.0)))
    return total
