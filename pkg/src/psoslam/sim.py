"""Ground-truth world: waypoint-following vehicle and a gated range-bearing sensor."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .core import ControlInput, NoiseConfig, Observation, Pose, VehicleParams, wrap_angle
from .models import motion_step, predict_observation

DEFAULT_SCENARIO = "default"


@dataclass(frozen=True, eq=False)
class Scenario:
    landmarks: np.ndarray  # (L, 2)
    waypoints: np.ndarray  # (W, 2)
    vehicle: VehicleParams
    noise: NoiseConfig
    commanded_speed: float = 3.0
    waypoint_radius: float = 1.0
    loops: int = 1

    def __post_init__(self):
        lm = np.asarray(self.landmarks, dtype=float).reshape(-1, 2)
        wp = np.asarray(self.waypoints, dtype=float).reshape(-1, 2)
        if lm.shape[0] < 1:
            raise ValueError("scenario needs at least one landmark")
        if wp.shape[0] < 2:
            raise ValueError("scenario needs at least two waypoints")
        if not self.commanded_speed > 0:
            raise ValueError("commanded_speed must be positive")
        object.__setattr__(self, "landmarks", lm)
        object.__setattr__(self, "waypoints", wp)

    def with_noise(self, noise: NoiseConfig) -> "Scenario":
        return replace(self, noise=noise)

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        vehicle = VehicleParams(
            wheelbase_b=d["wheelbase"],
            dt_control=d["dt_control"],
            obs_period_steps=int(d["obs_period_steps"]),
            max_steer=math.radians(d["max_steer_deg"]),
            sensor_max_range=d["sensor_range"],
            sensor_fov=math.radians(d["sensor_fov_deg"]),
        )
        noise = NoiseConfig.from_degrees(d["sigma_v"], d["sigma_gamma_deg"], d["sigma_r"], d["sigma_theta_deg"])
        return cls(np.array(d["landmarks"]), np.array(d["waypoints"]), vehicle, noise,
                   commanded_speed=d["speed"], waypoint_radius=d.get("waypoint_radius", 1.0),
                   loops=int(d.get("loops", 1)))

    def to_dict(self) -> dict:
        v, n = self.vehicle, self.noise
        return {
            "landmarks": self.landmarks.tolist(),
            "waypoints": self.waypoints.tolist(),
            "wheelbase": v.wheelbase_b,
            "dt_control": v.dt_control,
            "obs_period_steps": v.obs_period_steps,
            "max_steer_deg": math.degrees(v.max_steer),
            "sensor_range": v.sensor_max_range,
            "sensor_fov_deg": math.degrees(v.sensor_fov),
            "speed": self.commanded_speed,
            "sigma_v": n.sigma_v,
            "sigma_gamma_deg": math.degrees(n.sigma_gamma),
            "sigma_r": n.sigma_r,
            "sigma_theta_deg": math.degrees(n.sigma_theta),
            "loops": self.loops,
            "waypoint_radius": self.waypoint_radius,
        }


def load_scenario(path: str | Path) -> Scenario:
    """Read a scenario file; the name ``default`` resolves to the bundled scenario."""
    if str(path) == DEFAULT_SCENARIO:
        text = resources.files("psoslam").joinpath("data/default_scenario.json").read_text()
    else:
        text = Path(path).read_text()
    return Scenario.from_dict(json.loads(text))


@dataclass(frozen=True)
class SimState:
    true_pose: Pose = Pose(0.0, 0.0, 0.0)
    waypoint_index: int = 0  # counts across loops
    step: int = 0

    def terminal(self, sc: Scenario) -> bool:
        return self.waypoint_index >= sc.loops * len(sc.waypoints)


def control_step(sim: SimState, sc: Scenario) -> tuple[ControlInput, SimState]:
    """Steer toward the current waypoint, switching to the next one inside ``waypoint_radius``.

    Returns the control and the (possibly advanced) sim state.
    """
    if sim.terminal(sc):
        raise RuntimeError("route finished")
    pose = sim.true_pose
    wx, wy = sc.waypoints[sim.waypoint_index % len(sc.waypoints)]
    if math.hypot(wx - pose.x, wy - pose.y) < sc.waypoint_radius:
        sim = replace(sim, waypoint_index=sim.waypoint_index + 1)
        if sim.terminal(sc):
            return ControlInput(sc.commanded_speed, 0.0), sim
        wx, wy = sc.waypoints[sim.waypoint_index % len(sc.waypoints)]
    g = wrap_angle(math.atan2(wy - pose.y, wx - pose.x) - pose.phi)
    g = min(max(g, -sc.vehicle.max_steer), sc.vehicle.max_steer)
    return ControlInput(sc.commanded_speed, g), sim


def advance_truth(sim: SimState, u: ControlInput, sc: Scenario, rng) -> SimState:
    dv = rng.normal(0.0, sc.noise.sigma_v)
    dg = rng.normal(0.0, sc.noise.sigma_gamma)
    return replace(sim, true_pose=motion_step(sim.true_pose, u, (dv, dg), sc.vehicle), step=sim.step + 1)


def sense(sim: SimState, sc: Scenario, rng) -> list[Observation]:
    """Noisy range-bearing returns for landmarks inside range and the frontal field of view."""
    out = []
    half_fov = 0.5 * sc.vehicle.sensor_fov
    for i, lm in enumerate(sc.landmarks):
        r, b = predict_observation(sim.true_pose, lm)
        if r > sc.vehicle.sensor_max_range or abs(b) > half_fov:
            continue
        wr, wb = rng.normal(0.0, sc.noise.sigma_r), rng.normal(0.0, sc.noise.sigma_theta)
        out.append(Observation(max(r + wr, 1e-9), wrap_angle(b + wb), i))
    return out
