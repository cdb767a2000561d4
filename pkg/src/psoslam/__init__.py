"""FastSLAM 1.0 and a swarm-refined, noise-adaptive variant with a 2D range-bearing simulator."""

from .core import ControlInput, LandmarkEstimate, NoiseConfig, Observation, Particle, Pose, VehicleParams
from .filter import FilterConfig, FilterState, estimate, step
from .harness import ExperimentConfig, run_monte_carlo
from .sim import Scenario, load_scenario

__all__ = [
    "ControlInput", "ExperimentConfig", "FilterConfig", "FilterState", "LandmarkEstimate", "NoiseConfig",
    "Observation", "Particle", "Pose", "Scenario", "VehicleParams", "estimate", "load_scenario",
    "run_monte_carlo", "step",
]
