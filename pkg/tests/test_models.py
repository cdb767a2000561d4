import math

import numpy as np
import pytest

from psoslam.core import ControlInput, NoiseConfig, Observation, Pose, VehicleParams
from psoslam.models import (inverse_observation, inverse_observation_batch, motion_batch, motion_step,
                            obs_jacobian_landmark, observe_batch, predict_observation, sample_motion,
                            sample_motion_batch)

P = VehicleParams()


def test_motion_no_motion():
    assert motion_step(Pose(0, 0, 0), ControlInput(0, 0), (0, 0), P) == Pose(0, 0, 0)


def test_motion_straight_step():
    p = motion_step(Pose(0, 0, 0), ControlInput(3, 0), (0, 0), P)
    assert (p.x, p.y, p.phi) == pytest.approx((0.075, 0.0, 0.0), abs=1e-15)


def test_motion_steered_step_hand_evaluated():
    g = math.radians(30)
    p = motion_step(Pose(0, 0, 0), ControlInput(3, g), (0, 0), P)
    assert p.phi == pytest.approx(0.009375, abs=1e-15)
    assert p.x == pytest.approx(0.075 * math.cos(g))
    assert p.y == pytest.approx(0.075 * math.sin(g))


def test_motion_zero_steer_preserves_heading():
    rng = np.random.default_rng(1)
    for _ in range(50):
        phi = rng.uniform(-math.pi, math.pi)
        assert motion_step(Pose(1, 2, phi), ControlInput(rng.uniform(0, 5), 0), (0, 0), P).phi == Pose(0, 0, phi).phi


def test_motion_rejects_non_finite_and_excess_steer():
    with pytest.raises(ValueError):
        motion_step(Pose(0, 0, 0), ControlInput(float("nan"), 0), (0, 0), P)
    with pytest.raises(ValueError):
        motion_step(Pose(0, 0, 0), ControlInput(1, 1.5), (0, 0.2), P)


def test_sample_motion_degenerate_noise():
    n = NoiseConfig(1e-12, 1e-12, 1, 1)
    p = sample_motion(Pose(0, 0, 0), ControlInput(3, 0.1), n, P, np.random.default_rng(0))
    q = motion_step(Pose(0, 0, 0), ControlInput(3, 0.1), (0, 0), P)
    assert p.as_array() == pytest.approx(q.as_array(), abs=1e-12)


def test_sample_motion_deterministic_under_seed():
    n = NoiseConfig.from_degrees(0.3, 3, 0.2, 1)
    a = sample_motion(Pose(0, 0, 0), ControlInput(3, 0), n, P, np.random.default_rng(7))
    b = sample_motion(Pose(0, 0, 0), ControlInput(3, 0), n, P, np.random.default_rng(7))
    assert a == b


def test_sample_motion_monte_carlo_mean():
    # velocity noise only: x' = dt (V + dv), so the mean is exactly 0.075
    n = NoiseConfig(0.3, 1e-12, 0.2, 0.1)
    out = sample_motion_batch(np.zeros((100_000, 3)), ControlInput(3, 0), n, P, np.random.default_rng(3))
    se = out[:, 0].std() / math.sqrt(len(out))
    assert abs(out[:, 0].mean() - 0.075) < 3 * se


def test_sample_motion_monte_carlo_mean_with_steer_noise():
    # with steer noise the oracle is 0.075 * E[cos(dg)] = 0.075 * exp(-sigma^2 / 2)
    n = NoiseConfig.from_degrees(0.3, 3, 0.2, 1)
    out = sample_motion_batch(np.zeros((100_000, 3)), ControlInput(3, 0), n, P, np.random.default_rng(4))
    se = out[:, 0].std() / math.sqrt(len(out))
    assert abs(out[:, 0].mean() - 0.075 * math.exp(-0.5 * n.sigma_gamma**2)) < 3 * se


def test_motion_batch_matches_scalar():
    rng = np.random.default_rng(2)
    poses = rng.uniform(-5, 5, size=(20, 3))
    dv, dg = rng.normal(0, 0.3, 20), rng.normal(0, 0.05, 20)
    u = ControlInput(3, 0.2)
    out = motion_batch(poses, u, dv, dg, P)
    for i in range(20):
        ref = motion_step(Pose.from_array(poses[i]), u, (dv[i], dg[i]), P)
        np.testing.assert_allclose(out[i], ref.as_array(), atol=1e-12)


@pytest.mark.parametrize("pose, lm, expected", [
    (Pose(0, 0, 0), (3, 4), (5.0, 0.9272952180016122)),
    (Pose(0, 0, 0), (1, 0), (1.0, 0.0)),
    (Pose(1, 1, math.pi / 2), (1, 3), (2.0, 0.0)),
])
def test_predict_observation_examples(pose, lm, expected):
    assert predict_observation(pose, lm) == pytest.approx(expected, abs=1e-12)


def test_predict_observation_singular():
    with pytest.raises(ZeroDivisionError):
        predict_observation(Pose(1, 1, 0), (1, 1))


def _fd_jacobian(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.array(cols).T


def test_jacobian_examples():
    np.testing.assert_allclose(obs_jacobian_landmark(Pose(0, 0, 0), (1, 0)), np.eye(2))
    np.testing.assert_allclose(obs_jacobian_landmark(Pose(0, 0, 0), (0, 2)), [[0, 1], [-0.5, 0]])
    fd = _fd_jacobian(lambda lm: predict_observation(Pose(0, 0, 0), lm), (0, 2))
    np.testing.assert_allclose(fd, [[0, 1], [-0.5, 0]], atol=1e-8)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(11)
    for _ in range(100):
        pose = Pose(*rng.uniform(-10, 10, 2), rng.uniform(-math.pi, math.pi))
        r, a = rng.uniform(0.5, 20), rng.uniform(-math.pi, math.pi)
        lm = (pose.x + r * math.cos(a), pose.y + r * math.sin(a))
        J = obs_jacobian_landmark(pose, lm)
        fd = _fd_jacobian(lambda q: predict_observation(pose, q), lm)
        assert np.max(np.abs(J - fd)) <= 1e-6 * max(1.0, np.max(np.abs(J)))


def test_inverse_observation_example_and_round_trip():
    lm, _ = inverse_observation(Pose(0, 0, 0), Observation(5, 0.9272952180016122, 0))
    np.testing.assert_allclose(lm, (3, 4), atol=1e-12)
    rng = np.random.default_rng(5)
    for _ in range(200):
        pose = Pose(*rng.uniform(-50, 50, 2), rng.uniform(-math.pi, math.pi))
        z = Observation(rng.uniform(0.5, 20), rng.uniform(-math.pi / 2, math.pi / 2), 0)
        r, b = predict_observation(pose, inverse_observation(pose, z)[0])
        assert abs(r - z.range) < 1e-9
        assert abs(b - z.bearing) < 1e-9
        assert -math.pi < b <= math.pi


def test_inverse_observation_jacobian_matches_finite_differences():
    rng = np.random.default_rng(6)
    for _ in range(100):
        pose = Pose(*rng.uniform(-10, 10, 2), rng.uniform(-math.pi, math.pi))
        zr, zb = rng.uniform(0.5, 20), rng.uniform(-1.5, 1.5)
        _, J = inverse_observation(pose, Observation(zr, zb, 0))
        fd = _fd_jacobian(lambda q: inverse_observation(pose, Observation(q[0], q[1], 0))[0], (zr, zb))
        assert np.max(np.abs(J - fd)) <= 1e-6 * max(1.0, np.max(np.abs(J)))


def test_batch_observation_helpers_match_scalar():
    rng = np.random.default_rng(9)
    poses = rng.uniform(-5, 5, size=(4, 3))
    lm = rng.uniform(10, 20, size=(4, 3, 2))
    zhat, G = observe_batch(poses, lm)
    z = np.column_stack([rng.uniform(1, 20, 3), rng.uniform(-1, 1, 3)])
    inv_lm, inv_J = inverse_observation_batch(poses, z)
    for i in range(4):
        pose = Pose.from_array(poses[i])
        for k in range(3):
            assert zhat[i, k] == pytest.approx(predict_observation(pose, lm[i, k]), abs=1e-12)
            np.testing.assert_allclose(G[i, k], obs_jacobian_landmark(pose, lm[i, k]), atol=1e-12)
            ref_lm, ref_J = inverse_observation(pose, Observation(*z[k], 0))
            np.testing.assert_allclose(inv_lm[i, k], ref_lm, atol=1e-12)
            np.testing.assert_allclose(inv_J[i, k], ref_J, atol=1e-12)
