"""Vehicle kinematics and range-bearing sensor model.

Scalar functions work on :class:`~psoslam.core.Pose` values; the ``*_batch``
variants operate on ``(M, 3)`` pose arrays and are what the filter uses.
"""

from __future__ import annotations

import math

import numpy as np

from .core import ControlInput, NoiseConfig, Observation, Pose, VehicleParams, wrap_angle


def _check_finite(*vals):
    for v in vals:
        if not math.isfinite(v):
            raise ValueError("non-finite input to motion model")


def motion_step(pose: Pose, u: ControlInput, noise: tuple[float, float], p: VehicleParams) -> Pose:
    """One forward-Euler step of the bicycle kinematics with perturbed inputs."""
    dv, dg = noise
    _check_finite(pose.x, pose.y, pose.phi, u.v, u.gamma, dv, dg)
    v = u.v + dv
    g = u.gamma + dg
    if abs(g) >= math.pi / 2:
        raise ValueError(f"effective steer {g:.3f} rad outside (-pi/2, pi/2)")
    dt = p.dt_control
    return Pose(
        pose.x + dt * v * math.cos(pose.phi + g),
        pose.y + dt * v * math.sin(pose.phi + g),
        wrap_angle(pose.phi + dt * v / p.wheelbase_b * math.sin(g)),
    )


def sample_motion(pose: Pose, u: ControlInput, n: NoiseConfig, p: VehicleParams, rng: np.random.Generator) -> Pose:
    dv = rng.normal(0.0, n.sigma_v)
    dg = rng.normal(0.0, n.sigma_gamma)
    return motion_step(pose, u, (dv, dg), p)


def motion_batch(poses: np.ndarray, u: ControlInput, dv: np.ndarray, dg: np.ndarray, p: VehicleParams) -> np.ndarray:
    v = u.v + dv
    g = u.gamma + dg
    dt = p.dt_control
    heading = poses[:, 2] + g
    out = np.empty_like(poses)
    out[:, 0] = poses[:, 0] + dt * v * np.cos(heading)
    out[:, 1] = poses[:, 1] + dt * v * np.sin(heading)
    out[:, 2] = wrap_angle(poses[:, 2] + dt * v / p.wheelbase_b * np.sin(g))
    return out


def sample_motion_batch(poses: np.ndarray, u: ControlInput, n: NoiseConfig, p: VehicleParams,
                        rng: np.random.Generator) -> np.ndarray:
    draws = rng.standard_normal((2, poses.shape[0]))
    return motion_batch(poses, u, n.sigma_v * draws[0], n.sigma_gamma * draws[1], p)


def predict_observation(pose: Pose, lm) -> tuple[float, float]:
    """Range and bearing from ``pose`` to landmark position ``lm``."""
    dx = float(lm[0]) - pose.x
    dy = float(lm[1]) - pose.y
    r = math.hypot(dx, dy)
    if r == 0.0:
        raise ZeroDivisionError("landmark coincides with robot position")
    return r, wrap_angle(math.atan2(dy, dx) - pose.phi)


def obs_jacobian_landmark(pose: Pose, lm_mean) -> np.ndarray:
    """d(range, bearing) / d(lm_x, lm_y)."""
    dx = float(lm_mean[0]) - pose.x
    dy = float(lm_mean[1]) - pose.y
    q = dx * dx + dy * dy
    if q == 0.0:
        raise ZeroDivisionError("landmark coincides with robot position")
    r = math.sqrt(q)
    return np.array([[dx / r, dy / r], [-dy / q, dx / q]])


def inverse_observation(pose: Pose, z: Observation) -> tuple[np.ndarray, np.ndarray]:
    """Landmark position implied by ``z`` and the Jacobian of that position w.r.t. (range, bearing)."""
    if not z.range > 0.0:
        raise ValueError("range must be positive")
    a = pose.phi + z.bearing
    c, s = math.cos(a), math.sin(a)
    lm = np.array([pose.x + z.range * c, pose.y + z.range * s])
    jac = np.array([[c, -z.range * s], [s, z.range * c]])
    return lm, jac


def observe_batch(poses: np.ndarray, lm: np.ndarray):
    """Predicted observations and landmark Jacobians for every (particle, landmark) pair.

    ``poses`` is ``(M, 3)`` and ``lm`` is ``(M, K, 2)``. Returns ``zhat (M, K, 2)``
    and ``G (M, K, 2, 2)``.
    """
    dx = lm[..., 0] - poses[:, None, 0]
    dy = lm[..., 1] - poses[:, None, 1]
    q = dx * dx + dy * dy
    if np.any(q == 0.0):
        raise ZeroDivisionError("landmark coincides with robot position")
    r = np.sqrt(q)
    zhat = np.stack([r, wrap_angle(np.arctan2(dy, dx) - poses[:, None, 2])], axis=-1)
    G = np.empty(dx.shape + (2, 2))
    G[..., 0, 0] = dx / r
    G[..., 0, 1] = dy / r
    G[..., 1, 0] = -dy / q
    G[..., 1, 1] = dx / q
    return zhat, G


def inverse_observation_batch(poses: np.ndarray, z: np.ndarray):
    """Vectorised :func:`inverse_observation`; ``z`` is ``(K, 2)`` shared by all particles."""
    a = poses[:, None, 2] + z[None, :, 1]
    c, s = np.cos(a), np.sin(a)
    r = z[None, :, 0]
    lm = np.stack([poses[:, None, 0] + r * c, poses[:, None, 1] + r * s], axis=-1)
    J = np.empty(a.shape + (2, 2))
    J[..., 0, 0] = c
    J[..., 0, 1] = -r * s
    J[..., 1, 0] = s
    J[..., 1, 1] = r * c
    return lm, J
