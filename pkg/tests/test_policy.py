import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from firewatch.airframe import AircraftState, BankAction, apply_action, integrate
from firewatch.fire_model import new_fire_state
from firewatch.maps import BeliefMap
from firewatch.nn import ConfigError, build_q_network
from firewatch.policy import (
    BeliefWindow,
    PlannerConfig,
    RandomPolicy,
    RewardWeights,
    baseline_heuristic,
    baseline_random,
    build_relative_state,
    coordinate_descent,
    dqn_action,
    exhaustive_search,
    greedy,
    plan_objective,
    proximity_ramp,
    receding_horizon,
    reward,
    reward_terms,
    rollout,
)
from firewatch.sensor import CameraRig, footprint_cells

deg = math.radians


def blank(shape=(100, 100)):
    return BeliefMap.empty(shape)


def belief_from(mask):
    return BeliefMap(np.asarray(mask, float))


# ------------------------------------------------------------ relative state


def test_coincident_aircraft_convention():
    a = AircraftState(300, 300, 0.4)
    rs = build_relative_state(a, a, blank())
    assert (rs.rho, rs.theta_r, rs.psi_r) == (0.0, 0.0, 0.0)


def test_other_due_east_heading_north():
    rs = build_relative_state(AircraftState(500, 500, 0.0), AircraftState(500, 600, 0.0), blank())
    assert rs.rho == pytest.approx(100.0)
    assert rs.theta_r == pytest.approx(-math.pi / 2)


def test_other_due_west_is_positive_bearing():
    rs = build_relative_state(AircraftState(500, 500, 0.0), AircraftState(500, 400, deg(30)), blank())
    assert rs.theta_r == pytest.approx(math.pi / 2)
    assert rs.psi_r == pytest.approx(deg(30))


def test_banks_carried_through():
    own = AircraftState(0, 0, 0, phi=deg(10), phi_cmd=deg(10))
    other = AircraftState(50, 0, 0, phi=deg(-25), phi_cmd=deg(-25))
    rs = build_relative_state(own, other, blank())
    assert (rs.phi0, rs.phi1) == (deg(10), deg(-25))
    assert rs.scalars() == pytest.approx([0.05, 0.0, 0.0, 0.2, -0.5], abs=1e-7)


def test_empty_belief_gives_zero_image():
    rs = build_relative_state(AircraftState(500, 500, 1.0), AircraftState(0, 0, 0), blank())
    assert rs.belief_r.shape == (64, 64) and not rs.belief_r.any()


def test_off_map_reads_zero():
    full = belief_from(np.ones((100, 100)))
    rs = build_relative_state(AircraftState(5, 5, 0.0), AircraftState(0, 0, 0), full)
    img = rs.belief_r
    # aircraft sits in the south-west corner heading north: the lower-left quadrant is off the map
    assert not img[40:, :28].any() and img[:28, 36:].all()


def test_fire_ahead_appears_at_top_of_image():
    mask = np.zeros((100, 100), bool)
    mask[70:72, 49:51] = True  # 200 m north of the aircraft
    img = build_relative_state(AircraftState(505, 500, 0.0), AircraftState(0, 0, 0), belief_from(mask)).belief_r
    rows, cols = np.nonzero(img)
    assert rows.max() < 32 and abs(cols.mean() - 31.5) < 2
    # heading east, the same fire is on the left
    img = build_relative_state(AircraftState(505, 500, math.pi / 2), AircraftState(0, 0, 0), belief_from(mask)).belief_r
    rows, cols = np.nonzero(img)
    assert cols.max() < 32 and abs(rows.mean() - 31.5) < 2


@settings(max_examples=60, deadline=None)
@given(
    tx=st.floats(-500, 500),
    ty=st.floats(-500, 500),
    turn=st.floats(-math.pi, math.pi),
    own=st.tuples(st.floats(0, 1000), st.floats(0, 1000), st.floats(-3, 3), st.integers(-10, 10)),
    other=st.tuples(st.floats(0, 1000), st.floats(0, 1000), st.floats(-3, 3), st.integers(-10, 10)),
)
def test_geometry_invariant_to_world_motion(tx, ty, turn, own, other):
    def make(p):
        return AircraftState(p[0], p[1], p[2], phi=deg(5 * p[3]), phi_cmd=deg(5 * p[3]))

    def moved(a):
        c, s = math.cos(turn), math.sin(turn)
        return AircraftState(c * a.x - s * a.y + tx, s * a.x + c * a.y + ty, a.psi + turn, a.phi, a.phi_cmd)

    a, b = make(own), make(other)
    r1 = build_relative_state(a, b, blank((5, 5)))
    r2 = build_relative_state(moved(a), moved(b), blank((5, 5)))
    assert r2.rho == pytest.approx(r1.rho, abs=1e-9)
    if r1.rho > 1e-6:
        assert math.cos(r2.theta_r - r1.theta_r) == pytest.approx(1.0, abs=1e-9)
    assert math.cos(r2.psi_r - r1.psi_r) == pytest.approx(1.0, abs=1e-9)
    assert (r2.phi0, r2.phi1) == (r1.phi0, r1.phi1)


def random_blob_map(seed, shape=(60, 60)):
    rng = np.random.default_rng(seed)
    mask = np.zeros(shape, bool)
    for _ in range(6):
        i, j = rng.integers(5, shape[0] - 5, 2)
        mask[i - 3 : i + 3, j - 2 : j + 4] = True
    return mask


@pytest.mark.parametrize("seed", range(5))
def test_image_invariant_to_quarter_turn_of_world(seed):
    # rotating the world 90 degrees clockwise maps cell (i, j) to (H-1-j, i)
    mask = random_blob_map(seed)
    h = mask.shape[0]
    turned = np.zeros_like(mask)
    i, j = np.nonzero(mask)
    turned[h - 1 - j, i] = True
    rng = np.random.default_rng(seed)
    ci, cj = rng.integers(10, 50, 2)
    x, y, psi = (ci + 0.5) * 10, (cj + 0.5) * 10, rng.uniform(-math.pi, math.pi)
    a = AircraftState(x, y, psi)
    b = AircraftState(h * 10 - y, x, psi + math.pi / 2)
    window = BeliefWindow(32, 400.0)
    img_a = build_relative_state(a, a, belief_from(mask), window=window).belief_r
    img_b = build_relative_state(b, b, belief_from(turned), window=window).belief_r
    assert np.array_equal(img_a, img_b)


def test_image_invariant_to_whole_cell_translation():
    mask = random_blob_map(7)
    shifted = np.zeros((80, 80), bool)
    shifted[12:72, 5:65] = mask
    a = AircraftState(305, 295, 0.8)
    b = AircraftState(305 + 120, 295 + 50, 0.8)
    ia = build_relative_state(a, a, belief_from(mask)).belief_r
    ib = build_relative_state(b, b, belief_from(shifted)).belief_r
    # only pixels that land on the smaller map can agree
    assert np.array_equal(ia, ib * (ia > 0)) and ia.sum() > 0


# ------------------------------------------------------------ reward


def test_reward_zero_when_nothing_happens():
    fire = new_fire_state()
    assert reward(blank(), blank(), AircraftState(100, 100, 0), AircraftState(800, 800, 0), fire, RewardWeights()) == 0


def test_reward_counts_new_cells():
    fire = new_fire_state()
    prev = np.zeros((100, 100), bool)
    prev[10, 10:13] = True
    new = prev.copy()
    new[20, 20:25] = True
    new[10, 10] = False  # cells leaving the belief are not rewarded or penalised
    r = reward(belief_from(prev), belief_from(new), AircraftState(0, 0, 0), AircraftState(900, 900, 0), fire, RewardWeights())
    assert r == 5


def brute_force_under(burning, x, y, radius=40.0, cell=10.0):
    count = 0
    for i in range(burning.shape[0]):
        for j in range(burning.shape[1]):
            if burning[i, j] and math.hypot((i + 0.5) * cell - x, (j + 0.5) * cell - y) <= radius:
                count += 1
    return count


@pytest.mark.parametrize("pos", [(503.0, 497.0), (0.0, 0.0), (15.0, 995.0), (250.2, 730.9)])
def test_overfire_count_matches_brute_force(pos):
    rng = np.random.default_rng(int(pos[0]))
    fire = new_fire_state()
    fire.burning[:] = rng.random((100, 100)) < 0.5
    own = AircraftState(*pos, 0.0)
    t = reward_terms(blank(), blank(), own, AircraftState(900, 0, 0), fire.burning, RewardWeights(overfire=-1.0))
    assert t.overfire == -brute_force_under(fire.burning, *pos)


def test_proximity_ramp_shape():
    assert proximity_ramp([0, 30, 40, 50, 60, 80], 40, 60).tolist() == [1, 1, 1, 0.5, 0, 0]


def test_reward_terms_additive_and_removable():
    fire = new_fire_state()
    fire.burning[48:52, 48:52] = True
    prev = np.zeros((100, 100), bool)
    new = fire.burning.copy()
    own, other = AircraftState(500, 500, 0), AircraftState(500, 545, 0)
    w = RewardWeights(new_fire=2.0, proximity=-10.0, overfire=-0.5)
    t = reward_terms(belief_from(prev), belief_from(new), own, other, fire.burning, w)
    assert (t.new_fire, t.proximity, t.overfire) == (32.0, -7.5, -8.0)
    assert reward(belief_from(prev), belief_from(new), own, other, fire, w) == t.new_fire + t.proximity + t.overfire
    w0 = RewardWeights(new_fire=2.0, proximity=0.0, overfire=0.0)
    assert reward(belief_from(prev), belief_from(new), own, other, fire, w0) == t.new_fire


def test_weight_signs_validated():
    with pytest.raises(ValueError):
        RewardWeights(new_fire=0.0)
    with pytest.raises(ValueError):
        RewardWeights(overfire=0.5)


# ------------------------------------------------------------ DQN action


def constant_net(q0, q1):
    net = build_q_network(rng=np.random.default_rng(0))
    for p in net.parameters():
        p[...] = 0
    net.head_layers[-1].params["b"][...] = (q0, q1)
    return net


def some_state(window=BeliefWindow()):
    return build_relative_state(AircraftState(500, 500, 0), AircraftState(600, 500, 0), blank(), window=window)


def test_dqn_tie_goes_to_lower_bank():
    assert dqn_action(some_state(), constant_net(1.0, 1.0)) is BankAction.DECREASE


def test_dqn_argmax():
    assert dqn_action(some_state(), constant_net(0.2, 0.7)) is BankAction.INCREASE
    assert dqn_action(some_state(), constant_net(0.7, 0.2)) is BankAction.DECREASE


@settings(max_examples=50, deadline=None)
@given(q=st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), c=st.floats(1e-3, 1e3))
def test_greedy_invariant_to_positive_scaling(q, c):
    assert greedy(q) is greedy((q[0] * c, q[1] * c))


def test_dqn_dimension_mismatch():
    with pytest.raises(ConfigError):
        dqn_action(some_state(BeliefWindow(32, 1000.0)), build_q_network())


# ------------------------------------------------------------ baselines


def test_random_baseline_is_fair_and_seeded():
    draws = [baseline_random(np.random.default_rng(0)) for _ in range(3)]
    assert len(set(draws)) == 1
    pol = RandomPolicy(42)
    seq = [pol() for _ in range(10_000)]
    assert all(a in (BankAction.DECREASE, BankAction.INCREASE) for a in seq)
    assert abs(np.mean([int(a) for a in seq]) - 0.5) <= 0.02
    again = RandomPolicy(42)
    assert [again() for _ in range(100)] == seq[:100]


def fire_at(cells):
    mask = np.zeros((100, 100), bool)
    for i, j in cells:
        mask[i, j] = True
    return belief_from(mask)


def test_heuristic_dead_ahead_ties_low():
    own = AircraftState(205, 505, 0.0)
    assert baseline_heuristic(own, fire_at([(80, 50)])) is BankAction.DECREASE


def test_heuristic_turns_toward_target():
    own = AircraftState(505, 505, 0.0)
    # target far to the west is on the left when heading north
    assert baseline_heuristic(own, fire_at([(50, 5)])) is BankAction.DECREASE
    assert baseline_heuristic(own, fire_at([(50, 95)])) is BankAction.INCREASE


def test_heuristic_empty_belief_heads_to_centre():
    # north-west of centre; heading north the centre lies behind-right, heading south it lies ahead-left
    assert baseline_heuristic(AircraftState(800, 200, 0.0), blank()) is BankAction.INCREASE
    assert baseline_heuristic(AircraftState(800, 200, math.pi), blank()) is BankAction.DECREASE


def test_heuristic_orbits_near_fire():
    mask = np.zeros((100, 100), bool)
    mask[45:55, 45:55] = True
    # heading north just west of the fire: centroid to the right -> hold right bank
    own = AircraftState(500, 400, 0.0, phi=deg(50), phi_cmd=deg(50))
    assert baseline_heuristic(own, belief_from(mask)) is BankAction.INCREASE
    own = AircraftState(500, 600, 0.0, phi=deg(-50), phi_cmd=deg(-50))
    assert baseline_heuristic(own, belief_from(mask)) is BankAction.DECREASE


# ------------------------------------------------------------ planning


def test_rollout_matches_stepwise_integration():
    own = AircraftState(300, 300, 0.2, phi=deg(45), phi_cmd=deg(45))
    seq = np.array([[1, 1, 0, 1, 0, 0, 0, 1]])
    out = rollout(own, seq)
    s = own
    for t, a in enumerate(seq[0]):
        s = integrate(apply_action(s, a))
        assert out[:, 0, t] == pytest.approx([s.x, s.y, s.psi, s.phi], abs=1e-9)


def quadratic_objective(seed, horizon):
    rng = np.random.default_rng(seed)
    lin = rng.normal(size=horizon)
    quad = rng.normal(size=(horizon, horizon))
    return lambda s: s @ lin + np.einsum("ni,ij,nj->n", s, quad, s)


def test_single_step_equals_exhaustive():
    for seed in range(20):
        f = quadratic_objective(seed, 1)
        _, v = coordinate_descent(f, 1, 4, np.random.default_rng(seed))
        assert v == exhaustive_search(f, 1)[1]


@pytest.mark.parametrize("seed", range(10))
def test_result_is_single_flip_local_optimum(seed):
    f = quadratic_objective(seed, 5)
    seq, v = coordinate_descent(f, 5, 3, np.random.default_rng(seed))
    assert f(seq[None])[0] == pytest.approx(v)
    flips = np.tile(seq, (5, 1))
    flips[np.arange(5), np.arange(5)] ^= 1
    assert np.all(f(flips) <= v + 1e-12)


def test_exhaustive_enumerates_all_sequences():
    seen = []

    def f(s):
        seen.append(s.copy())
        return s.sum(axis=1)

    seq, v = exhaustive_search(f, 4)
    assert len({tuple(r) for r in seen[0]}) == 16 and v == 4 and seq.tolist() == [1, 1, 1, 1]


def loop_objective(own, other, fire, weights, rig, config, seq):
    """Sequential reference for the planner surrogate."""
    s, o = own, other
    seen = set()
    prox = over = 0.0
    for a in seq:
        s = integrate(apply_action(s, a), config.dt)
        o = integrate(o, config.dt)
        cells = footprint_cells(s, rig, fire.shape, 10.0).ravel()
        seen |= {c for c in cells if c >= 0 and fire.ravel()[c]}
        prox += float(proximity_ramp(math.hypot(s.x - o.x, s.y - o.y), weights.proximity_full, weights.proximity_cutoff))
        over += brute_force_under(fire, s.x, s.y, weights.overfire_radius)
    return weights.new_fire * len(seen) + weights.proximity * prox + weights.overfire * over


@pytest.mark.parametrize("seed", range(3))
def test_planner_objective_matches_sequential_reference(seed):
    rng = np.random.default_rng(seed)
    fire = np.zeros((60, 60), bool)
    fire[20:40, 25:45] = rng.random((20, 20)) < 0.7
    rig = CameraRig(samples_u=6, samples_v=4)
    config = PlannerConfig(horizon=6, execute=2, samples_u=6, samples_v=4)
    own = AircraftState(300, 200, 0.5, phi=deg(10), phi_cmd=deg(10))
    other = AircraftState(320, 240, 2.0, phi=deg(-20), phi_cmd=deg(-20))
    w = RewardWeights(overfire=-0.7)
    f = plan_objective(own, other, fire, w, rig, 10.0, config)
    seqs = rng.integers(0, 2, (4, 6))
    got = f(seqs)
    for k in range(4):
        assert got[k] == pytest.approx(loop_objective(own, other, fire, w, rig, config, seqs[k]), rel=1e-9)


def test_receding_horizon_returns_executable_prefix():
    fire = np.zeros((100, 100), bool)
    fire[40:60, 60:70] = True
    acts = receding_horizon(
        AircraftState(500, 300, 0.0), AircraftState(100, 100, 0.0), fire, RewardWeights(), np.random.default_rng(0)
    )
    assert len(acts) == 5 and all(isinstance(a, BankAction) for a in acts)


def test_descent_finds_exhaustive_optimum_on_planner_objective():
    fire = np.zeros((100, 100), bool)
    fire[45:60, 62:80] = True
    config = PlannerConfig(horizon=8, execute=2)
    own = AircraftState(500, 400, 0.0)
    f = plan_objective(own, AircraftState(480, 420, 0.5), fire, RewardWeights(), CameraRig(), 10.0, config)
    _, best = exhaustive_search(f, 8)
    _, found = coordinate_descent(f, 8, 32, np.random.default_rng(0))
    assert found == best


def test_planner_config_validated():
    with pytest.raises(ValueError):
        PlannerConfig(horizon=5, execute=5)
