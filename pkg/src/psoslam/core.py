"""Shared value types, angle arithmetic and closed-form 2x2 helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Wrap an angle (or array of angles) into the half-open interval (-pi, pi].

    Scalars come back as Python floats, arrays as float arrays. Angles already
    in range are returned bit-for-bit.
    """
    if isinstance(a, np.ndarray):
        if not np.all(np.isfinite(a)):
            raise ValueError("wrap_angle: non-finite input")
        out = np.mod(a + math.pi, TWO_PI) - math.pi
        out[out <= -math.pi] += TWO_PI
        inside = (a > -math.pi) & (a <= math.pi)
        return np.where(inside, a, out).astype(float)
    a = float(a)
    if not math.isfinite(a):
        raise ValueError(f"wrap_angle: non-finite input {a!r}")
    if -math.pi < a <= math.pi:
        return a
    out = math.fmod(a + math.pi, TWO_PI)
    if out < 0.0:
        out += TWO_PI
    out -= math.pi
    if out <= -math.pi:
        out += TWO_PI
    return out


def det2(m: np.ndarray) -> np.ndarray:
    """Determinant of one or a stack of 2x2 matrices (last two axes)."""
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def inv2(m: np.ndarray, min_det: float = 1e-300) -> np.ndarray:
    """Closed-form inverse of one or a stack of 2x2 matrices."""
    d = det2(m)
    if np.any(np.abs(d) < min_det):
        raise np.linalg.LinAlgError("singular 2x2 matrix")
    out = np.empty_like(m, dtype=float)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 1, 1] = m[..., 0, 0]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    return out / d[..., None, None]


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def eigvals_sym2(m: np.ndarray) -> np.ndarray:
    """Eigenvalues (ascending) of symmetric 2x2 matrices, closed form."""
    a, b, c = m[..., 0, 0], m[..., 0, 1], m[..., 1, 1]
    half_tr = 0.5 * (a + c)
    rad = np.sqrt(0.25 * (a - c) ** 2 + b * b)
    return np.stack([half_tr - rad, half_tr + rad], axis=-1)


def is_psd2(m: np.ndarray, tol: float = 1e-9) -> bool:
    m = np.asarray(m, dtype=float)
    if np.max(np.abs(m - np.swapaxes(m, -1, -2))) > tol:
        return False
    return bool(np.all(eigvals_sym2(m) >= -tol))


@dataclass(frozen=True)
class Pose:
    """Planar robot pose; ``phi`` is wrapped into (-pi, pi] on construction."""

    x: float
    y: float
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "phi", wrap_angle(self.phi))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.phi])

    @classmethod
    def from_array(cls, a) -> "Pose":
        return cls(a[0], a[1], a[2])


@dataclass(frozen=True)
class ControlInput:
    v: float      # m/s
    gamma: float  # steer, rad


@dataclass(frozen=True)
class Observation:
    range: float
    bearing: float
    landmark_id: int

    def __post_init__(self):
        if not self.range > 0.0:
            raise ValueError(f"observation range must be positive, got {self.range}")
        object.__setattr__(self, "bearing", wrap_angle(self.bearing))

    def as_array(self) -> np.ndarray:
        return np.array([self.range, self.bearing])


@dataclass(frozen=True, eq=False)
class LandmarkEstimate:
    """Gaussian belief over one 2D point feature. The covariance is symmetrized on construction."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(2)
        cov = np.array(self.cov, dtype=float).reshape(2, 2)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", symmetrize(cov))


@dataclass
class Particle:
    pose: Pose
    weight: float = 1.0
    landmarks: dict[int, LandmarkEstimate] = field(default_factory=dict)


@dataclass(frozen=True)
class NoiseConfig:
    """Process (v, gamma) and measurement (range, bearing) noise standard deviations."""

    sigma_v: float
    sigma_gamma: float
    sigma_r: float
    sigma_theta: float

    def __post_init__(self):
        for name in ("sigma_v", "sigma_gamma", "sigma_r", "sigma_theta"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def q_mat(self) -> np.ndarray:
        return np.diag([self.sigma_v**2, self.sigma_gamma**2])

    @property
    def r_mat(self) -> np.ndarray:
        return np.diag([self.sigma_r**2, self.sigma_theta**2])

    @classmethod
    def from_degrees(cls, sigma_v, sigma_gamma_deg, sigma_r, sigma_theta_deg) -> "NoiseConfig":
        return cls(sigma_v, math.radians(sigma_gamma_deg), sigma_r, math.radians(sigma_theta_deg))


@dataclass(frozen=True)
class VehicleParams:
    wheelbase_b: float = 4.0
    dt_control: float = 0.025
    obs_period_steps: int = 8
    max_steer: float = math.radians(30.0)
    sensor_max_range: float = 20.0
    sensor_fov: float = math.pi

    def __post_init__(self):
        for name in ("wheelbase_b", "dt_control", "max_steer", "sensor_max_range", "sensor_fov"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if int(self.obs_period_steps) < 1:
            raise ValueError("obs_period_steps must be >= 1")
