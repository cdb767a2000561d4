"""Regenerate the bundled default scenario (closed 17-waypoint loop, 100 landmarks)."""

import json
from pathlib import Path

import numpy as np

WAYPOINTS = [
    (30, 0), (70, 0), (110, 0), (150, 0), (185, 5), (200, 25), (200, 60), (195, 90),
    (170, 100), (130, 100), (90, 100), (50, 100), (15, 95), (0, 75), (0, 45), (2, 15), (12, 2),
]
N_LANDMARKS = 100


def scatter_landmarks(rng):
    route = np.array([(0.0, 0.0)] + WAYPOINTS, dtype=float)
    seg = np.diff(route, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    out = []
    for k, s in enumerate(np.linspace(0.0, cum[-1], N_LANDMARKS, endpoint=False) + 6.0):
        i = min(np.searchsorted(cum, s, side="right") - 1, len(seg) - 1)
        t = (s - cum[i]) / seg_len[i]
        p = route[i] + t * seg[i]
        normal = np.array([-seg[i, 1], seg[i, 0]]) / seg_len[i]
        side = 1.0 if k % 2 == 0 else -1.0
        offset = side * rng.uniform(4.0, 12.0)
        q = p + offset * normal + rng.uniform(-3.0, 3.0, size=2)
        out.append([round(float(q[0]), 2), round(float(q[1]), 2)])
    return out


def dumps(scenario: dict) -> str:
    """JSON with one point per line so the file diffs and reads well."""
    lines = []
    for key, value in scenario.items():
        if isinstance(value, list):
            pts = ",\n".join(f"    {json.dumps(pt)}" for pt in value)
            lines.append(f'  "{key}": [\n{pts}\n  ]')
        else:
            lines.append(f'  "{key}": {json.dumps(value)}')
    return "{\n" + ",\n".join(lines) + "\n}\n"


def main():
    rng = np.random.default_rng(20100607)
    scenario = {
        "landmarks": scatter_landmarks(rng),
        "waypoints": [list(map(float, w)) for w in WAYPOINTS],
        "wheelbase": 4.0,
        "dt_control": 0.025,
        "obs_period_steps": 8,
        "max_steer_deg": 30.0,
        "sensor_range": 20.0,
        "sensor_fov_deg": 180.0,
        "speed": 3.0,
        "sigma_v": 0.3,
        "sigma_gamma_deg": 3.0,
        "sigma_r": 0.2,
        "sigma_theta_deg": 1.0,
        "loops": 1,
        "waypoint_radius": 1.0,
    }
    out = Path(__file__).resolve().parents[1] / "src" / "psoslam" / "data" / "default_scenario.json"
    out.write_text(dumps(scenario))
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
