import json
import math
from dataclasses import replace

import numpy as np
import pytest

from psoslam.core import ControlInput, NoiseConfig, Pose, VehicleParams
from psoslam.models import motion_step, predict_observation
from psoslam.sim import Scenario, SimState, advance_truth, control_step, load_scenario, sense

QUIET = NoiseConfig(1e-12, 1e-12, 1e-12, 1e-12)


def scenario(landmarks=((10.0, 0.0),), waypoints=((50.0, 0.0), (100.0, 0.0)), noise=QUIET, **kw):
    return Scenario(np.array(landmarks), np.array(waypoints), VehicleParams(), noise, **kw)


def test_scenario_validation():
    with pytest.raises(ValueError):
        scenario(landmarks=np.zeros((0, 2)))
    with pytest.raises(ValueError):
        scenario(waypoints=((1.0, 1.0),))
    with pytest.raises(ValueError):
        scenario(commanded_speed=0.0)


def test_default_scenario_loads_and_round_trips(tmp_path):
    sc = load_scenario("default")
    assert len(sc.waypoints) == 17 and len(sc.landmarks) >= 35
    assert sc.vehicle.sensor_max_range == 20.0 and sc.vehicle.max_steer == pytest.approx(math.radians(30))
    assert sc.noise.sigma_r == 0.2 and sc.commanded_speed == 3.0
    path = tmp_path / "sc.json"
    path.write_text(json.dumps(sc.to_dict()))
    again = load_scenario(path)
    np.testing.assert_array_equal(again.landmarks, sc.landmarks)
    # degrees on disk, radians in memory: equal up to the last bit
    assert again.vehicle.sensor_fov == pytest.approx(sc.vehicle.sensor_fov, rel=1e-15)
    assert list(vars(again.noise).values()) == pytest.approx(list(vars(sc.noise).values()), rel=1e-15)


def test_control_dead_ahead_and_clamped():
    sc = scenario()
    u, _ = control_step(SimState(), sc)
    assert u == ControlInput(3.0, 0.0)
    left = scenario(waypoints=((0.0, 50.0), (0.0, 100.0)))
    u, _ = control_step(SimState(), left)
    assert u.gamma == pytest.approx(math.radians(30))
    right = scenario(waypoints=((0.0, -50.0), (0.0, -100.0)))
    assert control_step(SimState(), right)[0].gamma == pytest.approx(-math.radians(30))


def test_waypoint_switch_advances_by_one():
    sc = scenario(waypoints=((0.5, 0.0), (0.6, 0.0), (100.0, 0.0)))
    _, sim = control_step(SimState(), sc)
    assert sim.waypoint_index == 1


def test_route_terminates_after_loops():
    sc = scenario(waypoints=((5.0, 0.0), (10.0, 0.0)), loops=1)
    sim, rng = SimState(), np.random.default_rng(0)
    for _ in range(10_000):
        u, sim = control_step(sim, sc)
        if sim.terminal(sc):
            break
        sim = advance_truth(sim, u, sc, rng)
    assert sim.terminal(sc)
    assert sim.true_pose.x == pytest.approx(9.0, abs=0.1)
    with pytest.raises(RuntimeError):
        control_step(sim, sc)


def test_quiet_truth_is_straight_line():
    sc, sim, rng = scenario(), SimState(), np.random.default_rng(1)
    for _ in range(200):
        u, sim = control_step(sim, sc)
        sim = advance_truth(sim, u, sc, rng)
    assert abs(sim.true_pose.y) < 1e-9 and abs(sim.true_pose.phi) < 1e-9
    assert sim.true_pose.x == pytest.approx(200 * 0.075, abs=1e-8)
    assert sim.step == 200


def test_truth_reproducible_under_seed():
    sc = scenario(noise=NoiseConfig.from_degrees(0.3, 3, 0.2, 1))

    def run(seed):
        sim, rng = SimState(), np.random.default_rng(seed)
        for _ in range(100):
            u, sim = control_step(sim, sc)
            sim = advance_truth(sim, u, sc, rng)
        return sim

    assert run(5) == run(5)
    assert run(5) != run(6)


def test_truth_monte_carlo_mean():
    # velocity noise only, so the one-step mean is exactly the noiseless step
    sc = scenario(noise=NoiseConfig(0.3, 1e-12, 0.2, 0.01))
    rng = np.random.default_rng(2)
    u = ControlInput(3.0, 0.2)
    start = SimState(Pose(1.0, 1.0, 0.4))
    out = np.array([advance_truth(start, u, sc, rng).true_pose.as_array() for _ in range(10_000)])
    ref = motion_step(start.true_pose, u, (0, 0), sc.vehicle).as_array()
    se = out.std(axis=0) / 100.0
    assert np.all(np.abs(out.mean(axis=0) - ref) <= 3 * se + 1e-15)


def test_sense_gating():
    sc = scenario(landmarks=((-5.0, 0.0), (25.0, 0.0), (0.0, 10.0), (10.0, 1.0)))
    obs = sense(SimState(), sc, np.random.default_rng(0))
    # behind, out of range, on the FOV edge (included), in front
    assert [o.landmark_id for o in obs] == [2, 3]
    assert sense(SimState(Pose(500, 500, 0)), sc, np.random.default_rng(0)) == []


def test_sense_noiseless_matches_prediction():
    sc = scenario(landmarks=((10.0, 3.0), (5.0, -4.0)), noise=NoiseConfig(1e-300, 1e-300, 1e-300, 1e-300))
    sim = SimState(Pose(1.0, 0.5, 0.1))
    for o in sense(sim, sc, np.random.default_rng(0)):
        assert (o.range, o.bearing) == pytest.approx(predict_observation(sim.true_pose, sc.landmarks[o.landmark_id]),
                                                     abs=1e-12)


def test_sense_invariants_on_default_route():
    sc = load_scenario("default")
    sim, rng = SimState(), np.random.default_rng(3)
    bound = sc.vehicle.sensor_fov / 2 + 4 * sc.noise.sigma_theta
    for _ in range(2000):
        u, sim = control_step(sim, sc)
        sim = advance_truth(sim, u, sc, rng)
        if sim.step % 8:
            continue
        obs = sense(sim, sc, rng)
        assert len(obs) <= len(sc.landmarks)
        assert all(0 <= o.landmark_id < len(sc.landmarks) for o in obs)
        assert all(abs(o.bearing) <= bound for o in obs)


def test_with_noise_replaces_only_noise():
    sc = load_scenario("default")
    other = sc.with_noise(QUIET)
    assert other.noise == QUIET and other.vehicle == sc.vehicle
    assert replace(other, noise=sc.noise).noise == sc.noise
