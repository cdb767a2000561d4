"""FastSLAM 1.0 and its swarm-refined / adaptive-R variants.

Particles are stored as arrays (struct-of-arrays) so that one observation epoch
costs a handful of vectorised numpy calls regardless of the particle count.
Data association is known and shared by all particles, so every particle maps
the same set of landmark ids; column ``k`` of ``lm_mean``/``lm_cov`` belongs to
``lm_ids[k]``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .anfis import AdaptiveR, AnfisConfig, adapt_r
from .core import (ControlInput, LandmarkEstimate, NoiseConfig, Observation, Particle, Pose,
                   VehicleParams, det2, inv2, wrap_angle)
from .ekf import check_innovation_cov, innovation_batch, update_batch
from .models import inverse_observation_batch, observe_batch, sample_motion_batch
from .pso import PsoOptions, refine_particle_poses

log = logging.getLogger(__name__)

VARIANTS = ("baseline", "pso", "pso_anfis")
LOG_2PI = math.log(2.0 * math.pi)
DEGENERATE_MASS = 1e-300


@dataclass(frozen=True)
class FilterConfig:
    num_particles: int = 20
    variant: str = "pso"
    resample_fraction: float = 0.75
    pso_opts: PsoOptions = PsoOptions()
    r_initial: np.ndarray = field(default_factory=lambda: np.diag([0.2**2, math.radians(1.0) ** 2]))
    anfis: AnfisConfig = AnfisConfig()

    def __post_init__(self):
        if self.num_particles < 1:
            raise ValueError("num_particles must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not 0.0 < self.resample_fraction <= 1.0:
            raise ValueError("resample_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class StepInfo:
    observed: bool = False
    neff: float = float("nan")
    resampled: bool = False
    degenerate: bool = False
    pso_iters: int = 0
    gbest_fitness: float = float("nan")


@dataclass(eq=False)
class FilterState:
    poses: np.ndarray    # (M, 3)
    weights: np.ndarray  # (M,)
    lm_ids: list[int]
    lm_mean: np.ndarray  # (M, K, 2)
    lm_cov: np.ndarray   # (M, K, 2, 2)
    adaptive_r: AdaptiveR | None = None
    step_count: int = 0
    info: StepInfo = StepInfo()

    @property
    def num_particles(self) -> int:
        return self.poses.shape[0]

    @classmethod
    def initial(cls, cfg: FilterConfig, pose: Pose = Pose(0.0, 0.0, 0.0)) -> "FilterState":
        m = cfg.num_particles
        adaptive = AdaptiveR.create(cfg.r_initial, cfg.anfis) if cfg.variant == "pso_anfis" else None
        return cls(np.tile(pose.as_array(), (m, 1)), np.full(m, 1.0 / m), [],
                   np.zeros((m, 0, 2)), np.zeros((m, 0, 2, 2)), adaptive)

    @property
    def particles(self) -> list[Particle]:
        return [
            Particle(Pose.from_array(self.poses[i]), float(self.weights[i]),
                     {lid: LandmarkEstimate(self.lm_mean[i, k], self.lm_cov[i, k])
                      for k, lid in enumerate(self.lm_ids)})
            for i in range(self.num_particles)
        ]

    @classmethod
    def from_particles(cls, particles: Sequence[Particle], adaptive_r: AdaptiveR | None = None) -> "FilterState":
        ids = sorted(particles[0].landmarks)
        if any(sorted(p.landmarks) != ids for p in particles):
            raise ValueError("all particles must map the same landmark ids")
        m = len(particles)
        mean = np.array([[p.landmarks[i].mean for i in ids] for p in particles]).reshape(m, len(ids), 2)
        cov = np.array([[p.landmarks[i].cov for i in ids] for p in particles]).reshape(m, len(ids), 2, 2)
        return cls(np.array([p.pose.as_array() for p in particles]),
                   np.array([p.weight for p in particles], dtype=float), ids, mean, cov, adaptive_r)

    def current_r(self, cfg: FilterConfig) -> np.ndarray:
        if cfg.variant == "pso_anfis" and self.adaptive_r is not None:
            return self.adaptive_r.r_current
        return np.asarray(cfg.r_initial, dtype=float)


def predict(state: FilterState, u: ControlInput, n: NoiseConfig, p: VehicleParams, rng) -> FilterState:
    return replace(state, poses=sample_motion_batch(state.poses, u, n, p, rng))


def _split(state: FilterState, obs: Sequence[Observation]):
    """Partition a scan into (column indices, z) of mapped landmarks and the list of new ones."""
    col = {lid: k for k, lid in enumerate(state.lm_ids)}
    known = [o for o in obs if o.landmark_id in col]
    new = [o for o in obs if o.landmark_id not in col]
    cols = np.array([col[o.landmark_id] for o in known], dtype=int)
    z = np.array([o.as_array() for o in known]).reshape(-1, 2)
    return cols, z, new


def log_likelihood_batch(nu: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Sum over landmarks of the bivariate Gaussian log-density of each residual."""
    check_innovation_cov(Z)
    m = np.einsum("...i,...ij,...j->...", nu, inv2(Z), nu)
    return np.sum(-LOG_2PI - 0.5 * np.log(det2(Z)) - 0.5 * m, axis=-1)


def likelihood(particle: Particle, obs: Sequence[Observation], r_mat) -> float:
    """Product of per-landmark measurement densities; unmapped landmarks are skipped."""
    known = [o for o in obs if o.landmark_id in particle.landmarks]
    if not known:
        return 1.0
    z = np.array([o.as_array() for o in known])
    mean = np.array([particle.landmarks[o.landmark_id].mean for o in known])[None]
    cov = np.array([particle.landmarks[o.landmark_id].cov for o in known])[None]
    zhat, G = observe_batch(particle.pose.as_array()[None], mean)
    nu, Z = innovation_batch(zhat, G, cov, z, np.asarray(r_mat, dtype=float))
    return float(np.exp(log_likelihood_batch(nu, Z)[0]))


def _reweight(state: FilterState, loglik: np.ndarray, variant: str) -> tuple[np.ndarray, bool]:
    if variant == "baseline":
        with np.errstate(divide="ignore"):
            logw = np.log(state.weights) + loglik
    else:
        logw = np.array(loglik, dtype=float)
    top = np.max(logw)
    if not np.isfinite(top):
        return np.full_like(state.weights, 1.0 / state.num_particles), True
    w = np.exp(logw - top)
    total = w.sum()
    if top + math.log(total) < math.log(DEGENERATE_MASS):
        return np.full_like(state.weights, 1.0 / state.num_particles), True
    return w / total, False


def weight_update(state: FilterState, obs: Sequence[Observation], r_mat, variant: str = "baseline") -> FilterState:
    """Reweight by the scan likelihood.

    The baseline multiplies the previous weights; the swarm variants replace them.
    If the total mass underflows 1e-300 the weights are reset to uniform.
    """
    if not obs:
        raise ValueError("weight_update needs at least one observation")
    cols, z, _ = _split(state, obs)
    if cols.size == 0:
        loglik = np.zeros(state.num_particles)
    else:
        zhat, G = observe_batch(state.poses, state.lm_mean[:, cols])
        nu, Z = innovation_batch(zhat, G, state.lm_cov[:, cols], z, np.asarray(r_mat, dtype=float))
        loglik = log_likelihood_batch(nu, Z)
    w, degenerate = _reweight(state, loglik, variant)
    return replace(state, weights=w, info=replace(state.info, degenerate=degenerate))


def effective_sample_size(weights) -> float:
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be non-negative and sum to 1")
    return float(1.0 / np.sum(w * w))


def systematic_indices(weights: np.ndarray, rng, n: int | None = None) -> np.ndarray:
    """Low-variance resampling: ``n`` (default ``len(weights)``) indices from one uniform draw."""
    m = weights.shape[0] if n is None else n
    c = np.cumsum(weights)
    c[-1] = 1.0
    positions = (rng.uniform() + np.arange(m)) / m
    return np.searchsorted(c, positions, side="right")


def resample_systematic(state: FilterState, rng) -> FilterState:
    idx = systematic_indices(state.weights, rng)
    m = state.num_particles
    # fancy indexing copies, so duplicated maps never alias
    return replace(state, poses=state.poses[idx], weights=np.full(m, 1.0 / m),
                   lm_mean=state.lm_mean[idx], lm_cov=state.lm_cov[idx])


def step(state: FilterState, u: ControlInput, obs: Sequence[Observation] | None, cfg: FilterConfig,
         n: NoiseConfig, p: VehicleParams, rng) -> FilterState:
    """Advance one control period and, when a scan is supplied, run the full measurement epoch."""
    state = predict(state, u, n, p, rng)
    state.step_count += 1
    if obs is None:
        state.info = StepInfo()
        return state
    m = state.num_particles
    if not obs:
        state.info = StepInfo(observed=True, neff=effective_sample_size(state.weights))
        return state

    r_mat = state.current_r(cfg)
    cols, z, new = _split(state, obs)
    pso_iters, gbest = 0, float("nan")
    degenerate = False

    if cols.size:
        mean, cov = state.lm_mean[:, cols], state.lm_cov[:, cols]
        if cfg.variant != "baseline" and cfg.pso_opts.enabled:
            res = refine_particle_poses(state.poses, mean, cov, z, r_mat, cfg.pso_opts, rng)
            state.poses, pso_iters, gbest = res.poses, res.iterations, res.gbest_fit
        zhat, G = observe_batch(state.poses, mean)
        nu, Z = innovation_batch(zhat, G, cov, z, r_mat)
        state.weights, degenerate = _reweight(state, log_likelihood_batch(nu, Z), cfg.variant)
        if degenerate:
            log.debug("degenerate weights at step %d; reset to uniform", state.step_count)

        if cfg.variant == "pso_anfis":
            best = int(np.argmax(state.weights))
            state.adaptive_r = adapt_r(state.adaptive_r, nu[best], Z[best])
            r_mat = state.adaptive_r.r_current
            Z = G @ cov @ np.swapaxes(G, -1, -2) + r_mat

        new_mean, new_cov = update_batch(mean, cov, G, nu, Z)
        state.lm_mean = state.lm_mean.copy()
        state.lm_cov = state.lm_cov.copy()
        state.lm_mean[:, cols] = new_mean
        state.lm_cov[:, cols] = new_cov

    if new:
        z_new = np.array([o.as_array() for o in new])
        lm, J = inverse_observation_batch(state.poses, z_new)
        cov0 = J @ r_mat @ np.swapaxes(J, -1, -2)
        state.lm_mean = np.concatenate([state.lm_mean, lm], axis=1)
        state.lm_cov = np.concatenate([state.lm_cov, 0.5 * (cov0 + np.swapaxes(cov0, -1, -2))], axis=1)
        state.lm_ids = state.lm_ids + [o.landmark_id for o in new]

    neff = effective_sample_size(state.weights)
    resampled = neff < cfg.resample_fraction * m
    if resampled:
        state = resample_systematic(state, rng)
    state.info = StepInfo(True, neff, resampled, degenerate, pso_iters, gbest)
    return state


def estimate(state: FilterState) -> tuple[Pose, list[tuple[int, LandmarkEstimate]]]:
    """Weighted mean pose (circular mean heading) and the map of the heaviest particle."""
    w = state.weights
    x = float(w @ state.poses[:, 0])
    y = float(w @ state.poses[:, 1])
    best = int(np.argmax(w))
    # circular mean taken relative to the heaviest particle, exact when all headings agree
    ref = state.poses[best, 2]
    d = wrap_angle(state.poses[:, 2] - ref)
    phi = wrap_angle(ref + math.atan2(float(w @ np.sin(d)), float(w @ np.cos(d))))
    lm = [(lid, LandmarkEstimate(state.lm_mean[best, k], state.lm_cov[best, k]))
          for k, lid in enumerate(state.lm_ids)]
    return Pose(x, y, phi), lm


def pose_variance(state: FilterState, center: Pose | None = None) -> np.ndarray:
    """Weighted per-component sample variance of the particle poses (heading differences wrapped)."""
    c = center if center is not None else estimate(state)[0]
    d = state.poses - c.as_array()
    d[:, 2] = wrap_angle(d[:, 2])
    return state.weights @ (d * d)
