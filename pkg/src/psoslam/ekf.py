"""Per-landmark EKF: initialisation from a first sighting and the measurement update."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LandmarkEstimate, Observation, Pose, inv2, symmetrize, wrap_angle
from .models import inverse_observation, obs_jacobian_landmark, predict_observation

# relative conditioning bound for the innovation covariance
SINGULAR_RTOL = 1e-12


class SingularInnovation(np.linalg.LinAlgError):
    pass


def check_innovation_cov(Z: np.ndarray) -> None:
    """Raise :class:`SingularInnovation` if any 2x2 block in ``Z`` is (numerically) singular."""
    d = Z[..., 0, 0] * Z[..., 1, 1] - Z[..., 0, 1] * Z[..., 1, 0]
    scale = np.abs(Z[..., 0, 0] * Z[..., 1, 1])
    bad = ~np.isfinite(d) | (d <= SINGULAR_RTOL * scale) | (scale == 0.0)
    if np.any(bad):
        raise SingularInnovation("innovation covariance is singular")


@dataclass(frozen=True, eq=False)
class EkfUpdateResult:
    estimate: LandmarkEstimate
    innovation: np.ndarray      # (range, bearing) residual, bearing wrapped
    innovation_cov: np.ndarray  # Z = G Sigma G^T + R


def init_landmark(pose: Pose, z: Observation, r_mat) -> LandmarkEstimate:
    lm, J = inverse_observation(pose, z)
    return LandmarkEstimate(lm, J @ np.asarray(r_mat, dtype=float) @ J.T)


def update_landmark(est: LandmarkEstimate, pose: Pose, z: Observation, r_mat) -> EkfUpdateResult:
    zhat = np.array(predict_observation(pose, est.mean))
    G = obs_jacobian_landmark(pose, est.mean)
    Z = symmetrize(G @ est.cov @ G.T + np.asarray(r_mat, dtype=float))
    check_innovation_cov(Z)
    K = est.cov @ G.T @ inv2(Z)
    nu = z.as_array() - zhat
    nu[1] = wrap_angle(nu[1])
    mean = est.mean + K @ nu
    cov = (np.eye(2) - K @ G) @ est.cov
    return EkfUpdateResult(LandmarkEstimate(mean, cov), nu, Z)


def innovation_batch(zhat: np.ndarray, G: np.ndarray, cov: np.ndarray, z: np.ndarray, r_mat: np.ndarray):
    """Residuals and innovation covariances for stacked landmark predictions.

    ``zhat`` is ``(M, K, 2)``, ``G`` and ``cov`` ``(M, K, 2, 2)``, ``z`` ``(K, 2)``.
    """
    nu = z[None, :, :] - zhat
    nu[..., 1] = wrap_angle(nu[..., 1])
    Z = symmetrize(G @ cov @ np.swapaxes(G, -1, -2) + r_mat)
    return nu, Z


def update_batch(mean: np.ndarray, cov: np.ndarray, G: np.ndarray, nu: np.ndarray, Z: np.ndarray):
    """Vectorised measurement update; returns the posterior ``(mean, cov)``."""
    check_innovation_cov(Z)
    K = cov @ np.swapaxes(G, -1, -2) @ inv2(Z)
    new_mean = mean + np.einsum("...ij,...j->...i", K, nu)
    new_cov = symmetrize((np.eye(2) - K @ G) @ cov)
    return new_mean, new_cov
