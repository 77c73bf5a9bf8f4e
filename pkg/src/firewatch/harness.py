"""Episode orchestration, metrics, sweeps and file outputs.

One fire step spans ``ticks_per_step`` control ticks.  Each tick runs, in order:

1. every aircraft observes the current true fire;
2. the shared filter absorbs aircraft 0's images, then aircraft 1's, so each
   aircraft's reward is credited with the belief change its own images caused;
3. every aircraft picks a bank action from the updated belief;
4. the actions are applied and both aircraft are integrated one tick.

After the last tick of a fire step the belief and wind errors are evaluated,
the true fire advances, and the particle filter propagates.
"""
from __future__ import annotations

import csv
import json
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from firewatch import belief_ekf, belief_pf, nn
from firewatch.airframe import AircraftState, BankAction, apply_action, integrate
from firewatch.config import ScenarioConfig
from firewatch.fire_model import FireState, new_fire_state, seed_fire, step_fire
from firewatch.maps import BeliefMap, cells_within_radius
from firewatch.policy import (
    RandomPolicy,
    baseline_heuristic,
    build_relative_state,
    greedy,
    receding_horizon,
    reward_terms,
)
from firewatch.sensor import observe

FLOWN_OVER_RADIUS = 40.0


# ---------------------------------------------------------------- metrics


def flown_over_cells(burning: np.ndarray, positions, cell_size: float, radius: float = FLOWN_OVER_RADIUS) -> np.ndarray:
    """Flat indices of true burning cells within ``radius`` of any aircraft (a set, so overlaps count once)."""
    hits = [cells_within_radius(x, y, radius, burning.shape, cell_size) for x, y in positions]
    cells = np.unique(np.concatenate(hits)) if hits else np.zeros(0, np.int64)
    return cells[burning.ravel()[cells]]


def observed_fire_cells(burning: np.ndarray, sample_cells) -> np.ndarray:
    """Distinct true burning cells among in-range sample cells (negative entries are out of range)."""
    cells = np.asarray(sample_cells, dtype=np.int64).ravel()
    cells = np.unique(cells[cells >= 0])
    return cells[burning.ravel()[cells]]


def metric_flown_over(trajectory, fire_history, cell_size: float, radius: float = FLOWN_OVER_RADIUS) -> int:
    """Sum over ticks of burning cells within ``radius`` of either aircraft.

    ``trajectory[t]`` lists the (x, y) of every aircraft at tick t and
    ``fire_history[t]`` is the true burning map at that tick.
    """
    return int(sum(len(flown_over_cells(b, pos, cell_size, radius)) for pos, b in zip(trajectory, fire_history)))


def metric_observed(observation_stream, fire_history) -> int:
    """Sum over ticks of distinct true burning cells covered by any in-range sample that tick."""
    return int(sum(len(observed_fire_cells(b, cells)) for cells, b in zip(observation_stream, fire_history)))


def metric_belief_error(belief: BeliefMap, fire) -> int:
    """Hamming distance between the thresholded belief and the true burning map."""
    truth = fire.burning if isinstance(fire, FireState) else np.asarray(fire, bool)
    if belief.shape != truth.shape:
        raise ValueError(f"belief grid {belief.shape} does not match fire grid {truth.shape}")
    return int(np.count_nonzero(belief.binary != truth))


def metric_wind_error(estimate, truth) -> float:
    # sqrt(dx*dx + dy*dy) in that order, so the value is reproducible to the last bit
    dx = float(estimate[0]) - float(truth[0])
    dy = float(estimate[1]) - float(truth[1])
    return math.sqrt(dx * dx + dy * dy)


@dataclass
class MetricsRecord:
    """Episode totals; belief and wind errors are means over fire-step evaluations."""

    cells_flown_over: int = 0
    cells_observed: int = 0
    belief_hamming: float = 0.0
    wind_error: float = float("nan")
    ticks: int = 0
    evaluations: int = 0

    def __post_init__(self):
        if self.cells_flown_over < 0 or self.cells_observed < 0 or self.belief_hamming < 0:
            raise ValueError("metric counts must be non-negative")


# ---------------------------------------------------------------- simulation


def initial_aircraft(cfg: ScenarioConfig, rng: np.random.Generator) -> list[AircraftState]:
    """Start positions on an annulus around the seed centre, inside the map, with random headings."""
    f, a = cfg.fire, cfg.aircraft
    i0, j0, i1, j1 = f.seed_region
    cx, cy = (i0 + i1) / 2 * f.cell_size, (j0 + j1) / 2 * f.cell_size
    h, w = _grid_shape(cfg)
    xmax, ymax = h * f.cell_size, w * f.cell_size
    out: list[AircraftState] = []
    for _ in range(10_000):
        r = rng.uniform(*a.start_radius)
        bearing = rng.uniform(-math.pi, math.pi)
        x, y = cx + r * math.cos(bearing), cy + r * math.sin(bearing)
        psi = rng.uniform(-math.pi, math.pi)
        if not (0 <= x <= xmax and 0 <= y <= ymax):
            continue
        if any(math.hypot(x - o.x, y - o.y) < a.min_separation for o in out):
            continue
        out.append(AircraftState(x, y, psi, v=a.speed, h=a.altitude))
        if len(out) == a.count:
            return out
    raise RuntimeError("could not place aircraft; widen aircraft.start_radius or reduce min_separation")


def _grid_shape(cfg: ScenarioConfig):
    if cfg.fire.fuel_map is not None:
        return np.load(cfg.fire.fuel_map, mmap_mode="r").shape
    return tuple(cfg.fire.shape)


def _load_fuel(cfg: ScenarioConfig):
    return None if cfg.fire.fuel_map is None else np.load(cfg.fire.fuel_map)


@dataclass
class Snapshot:
    fire_step: int
    truth: np.ndarray
    belief: np.ndarray
    fuel_mean: np.ndarray | None = None
    winds: np.ndarray | None = None  # (P, 2)
    weights: np.ndarray | None = None


@dataclass
class History:
    """Per-tick raw data kept for the brute-force metric checks."""

    positions: list = field(default_factory=list)
    burning: list = field(default_factory=list)
    samples: list = field(default_factory=list)
    beliefs: list = field(default_factory=list)  # belief field at each evaluation
    truths: list = field(default_factory=list)
    winds: list = field(default_factory=list)


class Simulation:
    """Single logical timeline for one seeded episode."""

    def __init__(self, cfg: ScenarioConfig, seed: int, network=None, record: bool = False):
        self.cfg = cfg
        self.seed = int(seed)
        fire_ss, sensor_ss, pf_ss, start_ss, policy_ss = np.random.SeedSequence(self.seed).spawn(5)
        f = cfg.fire
        self.kernel = f.kernel()
        fire = new_fire_state(
            tuple(f.shape), f.fuel_init, f.wind, fire_ss, f.cell_size, f.step_period, _load_fuel(cfg)
        )
        self.fire = seed_fire(fire, f.seed_region)
        self.cell_size = f.cell_size
        self.rig = cfg.rig.rig()
        self.weights = cfg.reward_weights()
        self.sensor_rng = np.random.default_rng(sensor_ss)
        self.pf_rng = np.random.default_rng(pf_ss)
        self.aircraft = initial_aircraft(cfg, np.random.default_rng(start_ss))
        shape = self.fire.shape
        self.ekf = None
        self.pf = None
        if cfg.filter in ("ekf", "ekf+pf-eval"):
            e = cfg.ekf
            self.ekf = belief_ekf.EkfBelief.initial(shape, e.mu0, e.sigma0, q=e.q, r=e.r)
        if cfg.filter in ("pf", "ekf+pf-eval"):
            p = cfg.pf
            self.pf = belief_pf.init_ensemble(
                shape,
                f.seed_region,
                self.pf_rng,
                n_particles=p.n_particles,
                k_max=p.k_max,
                seed_burn=p.seed_burn,
                background_burn=p.background_burn,
                wind_prior_sigma=p.wind_prior_sigma,
                obs_correct_prob=p.obs_correct_prob,
                resample_interval=p.resample_interval,
                wind_noise_sigma=p.wind_noise_sigma,
            )
        self._belief = None
        self._setup_policy(network, policy_ss)
        self.tick = 0
        self.fire_step = 0
        self.flown_over = 0
        self.observed = 0
        self.hamming: list[int] = []
        self.wind_errors: list[float] = []
        self.last_rewards = [0.0] * len(self.aircraft)
        self.last_terms = [None] * len(self.aircraft)
        self.trajectory_rows: list[tuple] = []
        self.metric_rows: list[tuple] = []
        self.decision_rows: list[tuple] = []
        self.snapshots: list[Snapshot] = []
        self.history = History() if record else None

    # -------------------------------------------------------- policy set-up

    def _setup_policy(self, network, policy_ss):
        pc = self.cfg.policy
        self.network = None
        if pc.kind == "dqn":
            self.network = network if network is not None else nn.load_weights(pc.weights)
        rngs = [np.random.default_rng(s) for s in policy_ss.spawn(len(self.aircraft))]
        self.random_policies = [RandomPolicy(r) for r in rngs]
        self.planner_rngs = rngs
        self.planner_config = pc.planner_config()
        self.plans: list[list[BankAction]] = [[] for _ in self.aircraft]
        self._predicted = None

    # -------------------------------------------------------- beliefs

    def belief(self) -> BeliefMap:
        """Belief driving control and scored by the Hamming metric."""
        if self._belief is None:
            if self.ekf is not None:
                self._belief = belief_ekf.belief_map(self.ekf)
            else:
                self._belief = belief_pf.burn_estimate(self.pf)
        return self._belief

    def _absorb(self, cells: np.ndarray, obs: np.ndarray):
        if self.ekf is not None:
            self.ekf = belief_ekf.correct(self.ekf, cells, obs.astype(float))
        if self.pf is not None:
            self.pf = belief_pf.weight_update(self.pf, cells, obs)
            self.pf = belief_pf.bayes_update(self.pf, cells, obs)
        self._belief = None

    # -------------------------------------------------------- phases

    @property
    def n_ticks(self) -> int:
        return self.cfg.n_ticks

    @property
    def time(self) -> float:
        return self.tick * self.cfg.dt

    def observe_phase(self, count_metrics: bool = True) -> list[float]:
        """Observe, filter per aircraft in turn, credit rewards, and update the tick metrics."""
        burning = self.fire.burning
        if self.ekf is not None:
            self.ekf = belief_ekf.predict(self.ekf)
            self._belief = None
        rewards = []
        all_cells = []
        for k, own in enumerate(self.aircraft):
            other = self.aircraft[1 - k]
            images = observe(own, self.fire, self.rig, self.cfg.error_rate, self.sensor_rng, self.time)
            cells = np.concatenate([im.samples()[0] for im in images])
            obs = np.concatenate([im.samples()[1] for im in images])
            all_cells.append(cells)
            before = self.belief()
            self._absorb(cells, obs)
            terms = reward_terms(before, self.belief(), own, other, burning, self.weights, self.cell_size)
            self.last_terms[k] = terms
            rewards.append(terms.total)
        self.last_rewards = rewards
        if count_metrics:
            positions = [(a.x, a.y) for a in self.aircraft]
            sample_cells = np.concatenate(all_cells)
            self.flown_over += len(flown_over_cells(burning, positions, self.cell_size))
            self.observed += len(observed_fire_cells(burning, sample_cells))
            if self.history is not None:
                self.history.positions.append(positions)
                self.history.burning.append(burning.copy())
                self.history.samples.append(sample_cells)
        return rewards

    def relative_states(self):
        belief = self.belief()
        a = self.aircraft
        return [build_relative_state(a[k], a[1 - k], belief, self.cell_size) for k in range(len(a))]

    def agent_observations(self):
        return [(s.scalars(), s.belief_r.astype(np.float32)) for s in self.relative_states()]

    def select_actions(self) -> list[BankAction]:
        kind = self.cfg.policy.kind
        states = self.relative_states()
        q = None
        if kind == "dqn":
            scalars = np.stack([s.scalars() for s in states])
            images = np.stack([s.image() for s in states])
            q = self.network.forward(scalars, images)
            actions = [greedy(row) for row in q]
        elif kind == "random":
            actions = [p() for p in self.random_policies]
        elif kind == "heuristic":
            belief = self.belief()
            standoff = self.cfg.policy.heuristic_standoff
            actions = [baseline_heuristic(a, belief, self.cell_size, standoff) for a in self.aircraft]
        else:
            actions = self._planner_actions()
        if self.cfg.output.decision_log:
            for k, s in enumerate(states):
                qd, qi = (float(q[k, 0]), float(q[k, 1])) if q is not None else (float("nan"), float("nan"))
                self.decision_rows.append((self.tick, k, kind, s.rho, s.theta_r, s.psi_r, qd, qi, int(actions[k])))
        return actions

    def predicted_fire(self) -> np.ndarray:
        """Fire map the planner aims at: the belief pushed one fire step ahead (PF) or held (EKF)."""
        if self._predicted is None:
            if self.ekf is None and self.pf is not None:
                burn, _ = belief_pf._propagate_fields(self.pf.burn, self.pf.fuel, self.pf.wind, self.kernel)
                self._predicted = np.tensordot(self.pf.weights(), burn, axes=1) > 0.5
            else:
                self._predicted = self.belief().binary
        return self._predicted

    def _planner_actions(self) -> list[BankAction]:
        out = []
        for k, own in enumerate(self.aircraft):
            if not self.plans[k]:
                self.plans[k] = receding_horizon(
                    own,
                    self.aircraft[1 - k],
                    self.predicted_fire(),
                    self.weights,
                    self.planner_rngs[k],
                    self.planner_config,
                    self.rig,
                    self.cell_size,
                )
            out.append(self.plans[k].pop(0))
        return out

    def act(self, actions):
        """Apply both actions at once, integrate one tick and run the fire step when it falls due."""
        actions = [BankAction(int(a)) for a in actions]
        for k, a in enumerate(actions):
            s = self.aircraft[k]
            self.trajectory_rows.append(
                (self.tick, round(self.time, 6), k, s.x, s.y, s.psi, s.phi, s.phi_cmd, int(a), self.last_rewards[k])
            )
        self.aircraft = [integrate(apply_action(s, a), self.cfg.dt) for s, a in zip(self.aircraft, actions)]
        self.tick += 1
        if self.tick % self.cfg.ticks_per_step == 0:
            self.fire_phase()

    def fire_phase(self):
        """Score the belief against the truth, then advance the truth and the particle filter."""
        belief = self.belief()
        ham = metric_belief_error(belief, self.fire)
        self.hamming.append(ham)
        wind_est = np.full(2, np.nan)
        est = None
        if self.pf is not None:
            est = belief_pf.estimate(self.pf)
            wind_est = est.wind
            self.wind_errors.append(metric_wind_error(wind_est, self.fire.wind))
        if self.history is not None:
            self.history.beliefs.append(np.array(belief.field, copy=True))
            self.history.truths.append(self.fire.burning.copy())
            self.history.winds.append((np.array(wind_est), self.fire.wind.copy()))
        self.metric_rows.append(
            (
                self.fire_step,
                round(self.time, 6),
                self.flown_over,
                self.observed,
                ham,
                self.wind_errors[-1] if self.pf is not None else float("nan"),
                float(wind_est[0]),
                float(wind_est[1]),
                int(self.fire.burning.sum()),
            )
        )
        every = self.cfg.output.snapshot_every
        last = self.fire_step + 1 == self.cfg.fire_steps
        if last or (every and (self.fire_step + 1) % every == 0):
            self.snapshots.append(self._snapshot(self.fire_step + 1, belief, est))
        f = self.cfg.fire
        self.fire = step_fire(self.fire, self.kernel)
        self.fire_step += 1
        if f.wind_shift_step is not None and self.fire_step == f.wind_shift_step:
            self.fire.wind = np.asarray(f.wind_shift, float).copy()
        if self.pf is not None:
            self.pf = belief_pf.advance(self.pf, self.kernel, self.pf_rng)
        self._belief = None
        self._predicted = None

    def _snapshot(self, step: int, belief: BeliefMap, est) -> Snapshot:
        snap = Snapshot(step, self.fire.burning.copy(), np.array(belief.field, dtype=np.float32))
        if est is not None:
            snap.fuel_mean = est.fuel_mean.astype(np.float32)
            snap.winds = self.pf.wind.copy()
            snap.weights = est.weights.copy()
        return snap

    # -------------------------------------------------------- driver

    def run(self) -> MetricsRecord:
        while self.tick < self.n_ticks:
            self.observe_phase()
            self.act(self.select_actions())
        if not self.snapshots:
            self.snapshots.append(self._snapshot(0, self.belief(), belief_pf.estimate(self.pf) if self.pf is not None else None))
        return self.metrics()

    def metrics(self) -> MetricsRecord:
        return MetricsRecord(
            cells_flown_over=self.flown_over,
            cells_observed=self.observed,
            belief_hamming=float(np.mean(self.hamming)) if self.hamming else 0.0,
            wind_error=float(np.mean(self.wind_errors)) if self.wind_errors else float("nan"),
            ticks=self.tick,
            evaluations=len(self.hamming),
        )


class WildfireEnv:
    """Two-agent training environment over :class:`Simulation`.

    An environment step applies both actions, advances one tick (and the fire
    when due), then observes; the rewards returned are those credited by that
    observation.  Episodes end after ``cfg.n_ticks`` steps.
    """

    n_agents = 2

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.sim: Simulation | None = None

    def reset(self, seed):
        # the training policy is external, so the scenario runs without a loaded network
        cfg = replace(self.cfg, policy=replace(self.cfg.policy, kind="random"))
        self.sim = Simulation(cfg, seed)
        self.sim.observe_phase()
        return self.sim.agent_observations()

    def step(self, actions):
        sim = self.sim
        sim.act(actions)
        rewards = sim.observe_phase(count_metrics=sim.tick < sim.n_ticks)
        return sim.agent_observations(), rewards, sim.tick >= sim.n_ticks


# ---------------------------------------------------------------- outputs


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def to_gray(field_: np.ndarray, vmax: float = 1.0) -> np.ndarray:
    """8-bit grayscale with north (high i) at the top row."""
    scaled = np.clip(np.asarray(field_, float) / vmax, 0.0, 1.0)
    return np.flipud(np.rint(scaled * 255).astype(np.uint8))


def write_pgm(path, field_: np.ndarray, vmax: float = 1.0):
    Image.fromarray(to_gray(field_, vmax), mode="L").save(path, format="PPM")


def read_pgm(path) -> np.ndarray:
    return np.flipud(np.asarray(Image.open(path)))


def save_snapshots(snapshots: list[Snapshot], path: Path):
    data = {
        "fire_step": np.array([s.fire_step for s in snapshots]),
        "truth": np.stack([s.truth for s in snapshots]),
        "belief": np.stack([s.belief for s in snapshots]),
    }
    if snapshots and snapshots[0].fuel_mean is not None:
        data["fuel_mean"] = np.stack([s.fuel_mean for s in snapshots])
        data["winds"] = np.stack([s.winds for s in snapshots])
        data["weights"] = np.stack([s.weights for s in snapshots])
    np.savez_compressed(path, **data)


def render(run_dir, out_dir=None, k_max: float | None = None) -> list[Path]:
    """Write belief/truth (and particle-filter) rasters for every stored snapshot of a run."""
    run_dir = Path(run_dir)
    src = run_dir / "snapshots.npz"
    if not src.is_file():
        raise FileNotFoundError(f"{src} not found; is {run_dir} a run directory?")
    out = Path(out_dir) if out_dir else run_dir / "rasters"
    out.mkdir(parents=True, exist_ok=True)
    data = np.load(src)
    written = []
    for n, step in enumerate(data["fire_step"]):
        tag = f"{int(step):04d}"
        for name, field_ in (("truth", data["truth"][n]), ("belief", data["belief"][n])):
            p = out / f"{name}_{tag}.pgm"
            write_pgm(p, field_)
            written.append(p)
        if "fuel_mean" in data:
            fuel = data["fuel_mean"][n]
            p = out / f"pf_fuel_{tag}.pgm"
            write_pgm(p, fuel, k_max or max(float(fuel.max()), 1.0))
            written.append(p)
            p = out / f"pf_wind_{tag}.csv"
            _write_csv(p, ["wx", "wy", "weight"], [(*w, wt) for w, wt in zip(data["winds"][n], data["weights"][n])])
            written.append(p)
    return written


def write_outputs(sim: Simulation, record: MetricsRecord, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = sim.cfg
    cfg.save(out / "config.yaml")
    (out / "seed.json").write_text(
        json.dumps({"seed": sim.seed, "schema_version": cfg.schema_version, "scenario": cfg.name}, indent=2) + "\n"
    )
    _write_csv(
        out / "trajectory.csv",
        ["tick", "time", "aircraft", "x", "y", "psi", "phi", "phi_cmd", "action", "reward"],
        sim.trajectory_rows,
    )
    _write_csv(
        out / "metrics.csv",
        ["fire_step", "time", "cells_flown_over", "cells_observed", "belief_hamming", "wind_error", "wind_x", "wind_y", "true_burning"],
        sim.metric_rows,
    )
    _write_csv(out / "summary.csv", list(asdict(record)), [list(asdict(record).values())])
    if cfg.output.decision_log:
        _write_csv(
            out / "decisions.csv",
            ["tick", "aircraft", "policy", "rho", "theta_r", "psi_r", "q_decrease", "q_increase", "action"],
            sim.decision_rows,
        )
    save_snapshots(sim.snapshots, out / "snapshots.npz")
    render(out, k_max=cfg.pf.k_max)
    return out


def run_episode(cfg: ScenarioConfig, seed: int | None = None, out_dir=None, network=None, record: bool = False):
    """Run one seeded episode; write its artifacts when ``out_dir`` is given.

    Returns ``(MetricsRecord, Simulation)``.  ``cfg`` must already be validated.
    """
    seed = cfg.seeds[0] if seed is None else seed
    sim = Simulation(cfg, seed, network=network, record=record)
    rec = sim.run()
    if out_dir is not None:
        write_outputs(sim, rec, out_dir)
    return rec, sim


# ---------------------------------------------------------------- sweeps

METRIC_FIELDS = ("cells_flown_over", "cells_observed", "belief_hamming", "wind_error")


def _episode_job(args):
    cfg, seed, out_dir = args
    try:
        rec, _ = run_episode(cfg, seed, out_dir)
        return seed, rec, None
    except Exception:  # recorded and the sweep continues
        return seed, None, traceback.format_exc(limit=3)


def sweep(configs, out_dir, workers: int = 1, write_episodes: bool = True):
    """Run every config over its seeds; returns the aggregate rows and writes CSVs.

    ``episodes.csv`` holds one row per episode (failures keep their error text)
    and ``aggregate.csv`` the per-config means over successful episodes.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("sweep needs at least one config")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    episode_rows, aggregate = [], []
    for cfg in configs:
        jobs = [(cfg, s, out / cfg.name / f"seed_{s:04d}" if write_episodes else None) for s in cfg.seeds]
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                results = list(pool.map(_episode_job, jobs))
        else:
            results = [_episode_job(j) for j in jobs]
        recs = []
        for seed, rec, err in results:
            if rec is not None:
                recs.append(rec)
                episode_rows.append([cfg.name, seed, "ok", *(getattr(rec, m) for m in METRIC_FIELDS), ""])
            else:
                episode_rows.append([cfg.name, seed, "failed", *([float("nan")] * len(METRIC_FIELDS)), err.strip().splitlines()[-1]])
        means = [float(np.mean([getattr(r, m) for r in recs])) if recs else float("nan") for m in METRIC_FIELDS]
        aggregate.append(
            {
                "config": cfg.name,
                "filter": cfg.filter,
                "policy": cfg.policy.kind,
                "error_rate": cfg.error_rate,
                "overfire": cfg.reward_weights().overfire,
                "episodes": len(recs),
                "failures": len(results) - len(recs),
                **dict(zip(METRIC_FIELDS, means)),
            }
        )
    _write_csv(out / "episodes.csv", ["config", "seed", "status", *METRIC_FIELDS, "error"], episode_rows)
    _write_csv(out / "aggregate.csv", list(aggregate[0]), [list(r.values()) for r in aggregate])
    return aggregate


def variants(base: ScenarioConfig, overfire=None, error_rates=None) -> list[ScenarioConfig]:
    """Cartesian product of overfire penalties and error rates applied to ``base``."""
    out = []
    for pen in overfire if overfire is not None else [None]:
        for err in error_rates if error_rates is not None else [None]:
            cfg = base
            parts = []
            if pen is not None:
                cfg = replace(cfg, reward={**cfg.reward, "overfire": float(pen)})
                parts.append(f"overfire{pen:g}")
            if err is not None:
                cfg = replace(cfg, error_rate=float(err))
                parts.append(f"err{err:g}")
            out.append(replace(cfg, name="_".join([base.name, *parts])))
    return out
