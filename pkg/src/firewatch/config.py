"""Scenario configuration: nested dataclasses stored as versioned YAML.

Every field has a default, so an empty file is a valid scenario.  Unknown
keys, bad enumerations, missing referenced files and inconsistent clocks are
all reported as :class:`ConfigError` before anything is simulated.
"""
from __future__ import annotations

import dataclasses
import math
import typing
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from firewatch.errors import ConfigError
from firewatch.fire_model import IgnitionKernel
from firewatch.learner import DQNConfig
from firewatch.policy import PlannerConfig, RewardWeights
from firewatch.sensor import CameraRig

SCHEMA_VERSION = 1
FILTERS = ("ekf", "pf", "ekf+pf-eval")
POLICIES = ("dqn", "random", "heuristic", "planner")


@dataclass
class FireConfig:
    shape: tuple = (100, 100)
    cell_size: float = 10.0
    fuel_init: int = 20
    fuel_map: str | None = None  # .npy file of integer fuel levels, overrides fuel_init
    seed_region: tuple = (48, 28, 52, 32)  # (i0, j0, i1, j1), half-open
    wind: tuple = (0.0, 1.0)
    wind_shift_step: int | None = None  # fire step at which the truth wind switches
    wind_shift: tuple | None = None
    radius: int = 3
    base_prob: float = 0.09
    decay_length: float = 1.5
    wind_gain: float = 2.0
    step_period: float = 2.5

    def kernel(self) -> IgnitionKernel:
        return IgnitionKernel(self.radius, self.base_prob, self.decay_length, self.wind_gain)


@dataclass
class RigConfig:
    focal_length: float = 50.0
    sensor_width: float = 36.0
    sensor_height: float = 24.0
    theta_c_deg: float = 30.0
    phi_c_deg: tuple = (-40.0, -13.0, 13.0, 40.0)
    max_range: float = 300.0
    samples_u: int = 30
    samples_v: int = 20
    slant_range: bool = False

    def rig(self) -> CameraRig:
        return CameraRig(
            focal_length=self.focal_length,
            sensor_width=self.sensor_width,
            sensor_height=self.sensor_height,
            theta_c=math.radians(self.theta_c_deg),
            phi_c_list=tuple(math.radians(a) for a in self.phi_c_deg),
            max_range=self.max_range,
            samples_u=self.samples_u,
            samples_v=self.samples_v,
            slant_range=self.slant_range,
        )


@dataclass
class AircraftConfig:
    count: int = 2
    speed: float = 20.0
    altitude: float = 200.0
    # start positions are drawn on an annulus around the seed centre
    start_radius: tuple = (250.0, 450.0)
    min_separation: float = 100.0


@dataclass
class EkfConfig:
    q: float = 1e-3
    r: float = 0.5
    mu0: float = 0.0
    sigma0: float = 0.1


@dataclass
class PfConfig:
    n_particles: int = 40
    k_max: int = 20
    obs_correct_prob: float = 0.8
    resample_interval: int = 20
    wind_noise_sigma: float = 0.05
    wind_prior_sigma: float = 0.5
    seed_burn: float = 0.9
    background_burn: float = 0.0


@dataclass
class PolicyConfig:
    kind: str = "random"
    weights: str | None = None  # Q-network weight file for kind == "dqn"
    heuristic_standoff: float = 120.0
    planner: dict = field(default_factory=dict)  # PlannerConfig keyword arguments

    def planner_config(self) -> PlannerConfig:
        return PlannerConfig(**self.planner)


@dataclass
class OutputConfig:
    directory: str = "runs"
    snapshot_every: int = 10  # fire steps between raster snapshots; 0 keeps only the final pair
    decision_log: bool = True


@dataclass
class ScenarioConfig:
    schema_version: int = SCHEMA_VERSION
    name: str = "scenario"
    fire: FireConfig = field(default_factory=FireConfig)
    rig: RigConfig = field(default_factory=RigConfig)
    aircraft: AircraftConfig = field(default_factory=AircraftConfig)
    filter: str = "pf"
    ekf: EkfConfig = field(default_factory=EkfConfig)
    pf: PfConfig = field(default_factory=PfConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    reward: dict = field(default_factory=dict)  # RewardWeights keyword arguments
    error_rate: float = 0.10
    fire_steps: int = 60
    dt: float = 0.1
    ticks_per_step: int = 25
    seeds: list = field(default_factory=lambda: list(range(20)))
    train: dict = field(default_factory=dict)  # DQNConfig keyword arguments
    output: OutputConfig = field(default_factory=OutputConfig)

    def reward_weights(self) -> RewardWeights:
        return RewardWeights(**self.reward)

    def dqn_config(self) -> DQNConfig:
        return DQNConfig(**self.train)

    @property
    def n_ticks(self) -> int:
        return self.fire_steps * self.ticks_per_step

    def validate(self, base_dir: Path | None = None, check_weights: bool = True) -> ScenarioConfig:
        """Raise :class:`ConfigError` on the first problem found; return self otherwise.

        Relative file references are resolved against ``base_dir`` and rewritten
        as absolute paths so later stages do not depend on the working directory.
        """
        base = Path(base_dir) if base_dir else Path.cwd()
        try:
            _validate(self, base, check_weights)
        except TypeError as exc:  # wrongly typed values, e.g. a string where a number belongs
            raise ConfigError(f"bad value type: {exc}") from exc
        if self.fire.fuel_map is not None:
            self.fire.fuel_map = str(_resolve(self.fire.fuel_map, base).resolve())
        if self.policy.weights is not None and _resolve(self.policy.weights, base).is_file():
            self.policy.weights = str(_resolve(self.policy.weights, base).resolve())
        return self

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))
        return path


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _build(cls, data, where: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown keys {sorted(unknown)}")
    kw = {}
    for name, value in data.items():
        hint = hints[name]
        if dataclasses.is_dataclass(hint):
            kw[name] = _build(hint, value, f"{where}.{name}".lstrip("."))
        elif isinstance(value, list) and typing.get_origin(hint) is not list and hint is not list:
            kw[name] = tuple(value)
        else:
            kw[name] = value
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from exc


def from_dict(data: dict) -> ScenarioConfig:
    data = dict(data or {})
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}; this build reads {SCHEMA_VERSION}")
    return _build(ScenarioConfig, data, "")


def load_config(path=None, overrides=(), validate: bool = True, check_weights: bool = True) -> ScenarioConfig:
    """Read a YAML scenario (or defaults when ``path`` is None) and apply ``key.path=value`` overrides."""
    data = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        try:
            data = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        base = path.parent
    data = apply_overrides(data, overrides)
    cfg = from_dict(data)
    if validate:
        cfg.validate(base, check_weights)
    return cfg


def apply_overrides(data: dict, overrides) -> dict:
    """Set nested keys from strings like ``pf.n_particles=20``; values are parsed as YAML scalars."""
    data = _plain(dict(data or {}))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key.path=value")
        key, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"override {item!r}: {exc}") from exc
        node = data
        parts = key.strip().split(".")
        for part in parts[:-1]:
            child = node.get(part)
            if child is None:
                child = node[part] = {}
            if not isinstance(child, dict):
                raise ConfigError(f"override {item!r}: {part} is not a section")
            node = child
        node[parts[-1]] = value
    return data


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _resolve(path: str, base: Path) -> Path:
    p = Path(path)
    return p if p.is_absolute() or p.exists() else base / p


def _validate(cfg: ScenarioConfig, base: Path, check_weights: bool = True):
    f = cfg.fire
    _require(cfg.filter in FILTERS, f"filter must be one of {FILTERS}, got {cfg.filter!r}")
    _require(cfg.policy.kind in POLICIES, f"policy.kind must be one of {POLICIES}, got {cfg.policy.kind!r}")
    _require(len(f.shape) == 2 and min(f.shape) > 0, f"fire.shape must be two positive ints, got {f.shape}")
    _require(f.cell_size > 0, "fire.cell_size must be positive")
    _require(0 <= f.fuel_init <= cfg.pf.k_max, f"fire.fuel_init must lie in [0, pf.k_max={cfg.pf.k_max}]")
    _require(len(f.wind) == 2, "fire.wind must have two components")
    _require((f.wind_shift is None) == (f.wind_shift_step is None), "fire.wind_shift and fire.wind_shift_step go together")
    if f.fuel_map is not None:
        p = _resolve(f.fuel_map, base)
        _require(p.is_file(), f"fire.fuel_map {f.fuel_map} not found")
        fuel = np.load(p)
        _require(fuel.ndim == 2, "fire.fuel_map must be a 2-D array")
        _require(fuel.min() >= 0 and fuel.max() <= cfg.pf.k_max, f"fire.fuel_map levels must lie in [0, {cfg.pf.k_max}]")
        shape = fuel.shape
    else:
        shape = tuple(f.shape)
    i0, j0, i1, j1 = f.seed_region
    _require(0 <= i0 < i1 <= shape[0] and 0 <= j0 < j1 <= shape[1], f"fire.seed_region {f.seed_region} empty or off the grid")
    _require(f.radius >= 1 and f.base_prob >= 0 and f.decay_length > 0, "ignition kernel parameters out of range")
    _require(cfg.dt > 0 and cfg.ticks_per_step >= 1, "dt and ticks_per_step must be positive")
    _require(
        abs(f.step_period - cfg.dt * cfg.ticks_per_step) < 1e-9,
        f"clock mismatch: fire.step_period {f.step_period} != dt {cfg.dt} x ticks_per_step {cfg.ticks_per_step}",
    )
    _require(cfg.fire_steps >= 0, "fire_steps must be >= 0")
    _require(0.0 <= cfg.error_rate <= 1.0, "error_rate must lie in [0, 1]")
    _require(len(cfg.seeds) >= 1 and all(isinstance(s, int) and s >= 0 for s in cfg.seeds), "seeds must be non-negative ints")
    _require(len(cfg.rig.phi_c_deg) == 4, "rig.phi_c_deg needs four camera roll angles")
    _require(cfg.rig.max_range > 0 and cfg.rig.samples_u >= 2 and cfg.rig.samples_v >= 2, "rig parameters out of range")
    a = cfg.aircraft
    _require(a.count == 2, "aircraft.count must be 2 (the relative state pairs each aircraft with its teammate)")
    _require(a.speed > 0 and a.altitude > 0, "aircraft speed and altitude must be positive")
    _require(0 <= a.start_radius[0] <= a.start_radius[1], "aircraft.start_radius must be (inner, outer) with inner <= outer")
    p = cfg.pf
    _require(p.n_particles >= 1 and p.k_max >= 1, "pf.n_particles and pf.k_max must be >= 1")
    _require(0.5 < p.obs_correct_prob < 1.0, "pf.obs_correct_prob must lie in (0.5, 1)")
    _require(p.resample_interval >= 1, "pf.resample_interval must be >= 1")
    _require(0 <= p.seed_burn <= 1 and 0 <= p.background_burn <= 1, "pf burn priors must lie in [0, 1]")
    _require(cfg.ekf.r > 0 and cfg.ekf.q >= 0 and cfg.ekf.sigma0 >= 0, "ekf noise parameters out of range")
    _require(cfg.output.snapshot_every >= 0, "output.snapshot_every must be >= 0")
    try:
        cfg.reward_weights()
        cfg.policy.planner_config()
        cfg.dqn_config()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.policy.kind == "dqn" and check_weights:
        _require(cfg.policy.weights is not None, "policy.kind dqn needs policy.weights")
        _require(_resolve(cfg.policy.weights, base).is_file(), f"policy.weights {cfg.policy.weights} not found")
