"""Gaussian particle swarm refinement of pose hypotheses.

Velocities follow ``v = |N1| (pbest - x) + |N2| (gbest - x)`` with no inertia,
acceleration constants or velocity clamp; the heading coordinate uses wrapped
differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import LandmarkEstimate, Observation, Particle, Pose, inv2, wrap_angle
from .ekf import check_innovation_cov, innovation_batch
from .models import observe_batch

CHI2_2DOF_95 = 5.99


@dataclass(frozen=True)
class PsoOptions:
    max_iters: int = 10
    # per applicable observation; scaled by the observation count at runtime
    fitness_threshold: float = CHI2_2DOF_95
    enabled: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.fitness_threshold < 0:
            raise ValueError("fitness_threshold must be >= 0")


@dataclass(frozen=True, eq=False)
class SwarmState:
    positions: np.ndarray   # (N, 3) x, y, phi
    velocities: np.ndarray  # (N, 3)
    pbest: np.ndarray       # (N, 3)
    pbest_fit: np.ndarray   # (N,)
    gbest: np.ndarray       # (3,)
    gbest_fit: float

    @classmethod
    def initial(cls, positions: np.ndarray, fit: np.ndarray) -> "SwarmState":
        positions = np.array(positions, dtype=float)
        fit = np.asarray(fit, dtype=float)
        g = int(np.argmin(fit))
        return cls(positions, np.zeros_like(positions), positions.copy(), fit.copy(),
                   positions[g].copy(), float(fit[g]))


def _diff(target: np.ndarray, x: np.ndarray) -> np.ndarray:
    d = target - x
    d[..., 2] = wrap_angle(d[..., 2])
    return d


def gaussian_pso_step(s: SwarmState, evaluate: Callable[[np.ndarray], np.ndarray], rng) -> SwarmState:
    """One velocity/position update followed by personal- and global-best bookkeeping.

    ``evaluate`` maps an ``(N, 3)`` array of positions to ``(N,)`` fitness values.
    """
    a = np.abs(rng.standard_normal((2,) + s.positions.shape))
    vel = a[0] * _diff(s.pbest, s.positions) + a[1] * _diff(s.gbest[None, :], s.positions)
    pos = s.positions + vel
    pos[:, 2] = wrap_angle(pos[:, 2])
    fit = np.asarray(evaluate(pos), dtype=float)

    better = fit < s.pbest_fit
    pbest = np.where(better[:, None], pos, s.pbest)
    pbest_fit = np.where(better, fit, s.pbest_fit)
    g = int(np.argmin(pbest_fit))
    if pbest_fit[g] < s.gbest_fit:
        gbest, gbest_fit = pbest[g].copy(), float(pbest_fit[g])
    else:
        gbest, gbest_fit = s.gbest, s.gbest_fit
    return SwarmState(pos, vel, pbest, pbest_fit, gbest, gbest_fit)


def fitness_batch(poses: np.ndarray, lm_mean: np.ndarray, lm_cov: np.ndarray, z: np.ndarray,
                  r_mat: np.ndarray) -> np.ndarray:
    """Summed squared Mahalanobis residual per pose; each row is scored against its own map.

    ``lm_mean`` ``(N, K, 2)`` and ``lm_cov`` ``(N, K, 2, 2)`` hold only the observed landmarks,
    aligned with the rows of ``z`` ``(K, 2)``.
    """
    if z.shape[0] == 0:
        return np.zeros(poses.shape[0])
    zhat, G = observe_batch(poses, lm_mean)
    nu, Z = innovation_batch(zhat, G, lm_cov, z, r_mat)
    check_innovation_cov(Z)
    Zi = inv2(Z)
    m = np.einsum("...i,...ij,...j->...", nu, Zi, nu)
    return m.sum(axis=1)


def _known(landmarks: dict[int, LandmarkEstimate], obs: Sequence[Observation]):
    known = [o for o in obs if o.landmark_id in landmarks]
    z = np.array([o.as_array() for o in known]).reshape(-1, 2)
    mean = np.array([landmarks[o.landmark_id].mean for o in known]).reshape(-1, 2)
    cov = np.array([landmarks[o.landmark_id].cov for o in known]).reshape(-1, 2, 2)
    return z, mean, cov


def fitness(pose: Pose, landmarks: dict[int, LandmarkEstimate], obs: Sequence[Observation], r_mat) -> float:
    """Squared Mahalanobis residual summed over the observations of already-mapped landmarks."""
    z, mean, cov = _known(landmarks, obs)
    return float(fitness_batch(pose.as_array()[None, :], mean[None], cov[None], z,
                               np.asarray(r_mat, dtype=float))[0])


@dataclass(frozen=True)
class RefineResult:
    poses: np.ndarray  # (N, 3) personal bests
    iterations: int
    gbest_fit: float


def refine_poses(poses: np.ndarray, evaluate: Callable[[np.ndarray], np.ndarray], threshold: float,
                 max_iters: int, rng) -> RefineResult:
    s = SwarmState.initial(poses, evaluate(poses))
    it = 0
    while s.gbest_fit >= threshold and it < max_iters:
        s = gaussian_pso_step(s, evaluate, rng)
        it += 1
    return RefineResult(s.pbest, it, s.gbest_fit)


def refine_particle_poses(poses, lm_mean, lm_cov, z, r_mat, opts: PsoOptions, rng) -> RefineResult:
    """Array-level refinement used by the filter; maps are ``(N, K, ...)`` over observed landmarks."""
    if not opts.enabled or z.shape[0] == 0:
        return RefineResult(np.array(poses, dtype=float), 0, float("nan"))

    def evaluate(p):
        return fitness_batch(p, lm_mean, lm_cov, z, r_mat)

    return refine_poses(poses, evaluate, opts.fitness_threshold * z.shape[0], opts.max_iters, rng)


def pso_refine(particles: Sequence[Particle], obs: Sequence[Observation], r_mat, opts: PsoOptions,
               rng) -> list[Pose]:
    """Move particle poses toward low fitness; maps and particle count are left untouched.

    Returns each particle's best pose found, in input order.
    """
    if not particles:
        raise ValueError("need at least one particle")
    poses = np.array([p.pose.as_array() for p in particles])
    if not opts.enabled:
        return [p.pose for p in particles]
    # landmarks seen for the first time carry no prior and are left out
    ids = [o.landmark_id for o in obs if all(o.landmark_id in p.landmarks for p in particles)]
    known = [o for o in obs if o.landmark_id in ids]
    if not known:
        return [p.pose for p in particles]
    z = np.array([o.as_array() for o in known])
    mean = np.array([[p.landmarks[o.landmark_id].mean for o in known] for p in particles])
    cov = np.array([[p.landmarks[o.landmark_id].cov for o in known] for p in particles])
    res = refine_particle_poses(poses, mean, cov, z, np.asarray(r_mat, dtype=float), opts, rng)
    return [Pose.from_array(row) for row in res.poses]
