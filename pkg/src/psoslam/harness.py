"""Monte Carlo experiment runner and error metrics.

Each run drives the simulator and the filter in lockstep: the truth executes
the noise-perturbed control, the filter is handed the commanded one, and a
scan is delivered every ``obs_period_steps`` control steps. Run ``i`` is seeded
with ``base_seed + i`` (separate streams for truth and filter), so variants
compared under the same seed see identical worlds.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .anfis import AnfisConfig
from .core import NoiseConfig, Pose, wrap_angle
from .filter import FilterConfig, FilterState, estimate, pose_variance, step
from .pso import PsoOptions
from .sim import DEFAULT_SCENARIO, SimState, advance_truth, control_step, load_scenario, sense

log = logging.getLogger(__name__)

CSV_COLUMNS = ("t", "true_x", "true_y", "true_phi", "est_x", "est_y", "est_phi", "err_pos", "err_phi",
               "neff", "resampled", "r_range", "r_bearing", "pso_iters", "gbest_fitness")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario_path: str = DEFAULT_SCENARIO
    filter: FilterConfig = FilterConfig()
    # what the filter believes; None -> the scenario's true noise
    filter_noise: NoiseConfig | None = None
    # replaces the noise stored in the scenario file
    truth_noise: NoiseConfig | None = None
    runs: int = 1
    base_seed: int = 0
    output_dir: str | None = None
    divergence_threshold: float = 5.0
    workers: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")

    def with_overrides(self, **kw) -> "ExperimentConfig":
        """Replace experiment fields; ``variant`` and ``particles`` reach into the filter config."""
        fcfg = self.filter
        if kw.get("variant") is not None:
            fcfg = replace(fcfg, variant=kw["variant"])
        if kw.get("particles") is not None:
            fcfg = replace(fcfg, num_particles=int(kw["particles"]))
        rest = {k: v for k, v in kw.items() if k not in ("variant", "particles") and v is not None}
        return replace(self, filter=fcfg, **rest)


def _noise_from(d: dict | None) -> NoiseConfig | None:
    if d is None:
        return None
    return NoiseConfig.from_degrees(d["sigma_v"], d["sigma_gamma_deg"], d["sigma_r"], d["sigma_theta_deg"])


def config_from_dict(d: dict, base_dir: Path | None = None) -> ExperimentConfig:
    scenario = d.get("scenario", DEFAULT_SCENARIO)
    if scenario != DEFAULT_SCENARIO and base_dir is not None and not Path(scenario).is_absolute():
        scenario = str(base_dir / scenario)
    anfis = d.get("anfis", {})
    if "r_floor" in anfis:
        anfis = {**anfis, "r_floor": tuple(anfis["r_floor"])}
    if anfis.get("d_max") is not None:
        anfis = {**anfis, "d_max": tuple(anfis["d_max"])}
    fcfg = FilterConfig(
        num_particles=int(d.get("particles", 20)),
        variant=d.get("variant", "pso"),
        resample_fraction=float(d.get("resample_fraction", 0.75)),
        pso_opts=PsoOptions(**d.get("pso", {})),
        anfis=AnfisConfig(**anfis),
    )
    return ExperimentConfig(
        scenario_path=scenario,
        filter=fcfg,
        filter_noise=_noise_from(d.get("filter_noise")),
        truth_noise=_noise_from(d.get("truth_noise")),
        runs=int(d.get("runs", 1)),
        base_seed=int(d.get("seed", 0)),
        output_dir=d.get("output_dir"),
        divergence_threshold=float(d.get("divergence_threshold", 5.0)),
        workers=int(d.get("workers", 1)),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return config_from_dict(json.loads(path.read_text()), path.parent)


# -- metrics ---------------------------------------------------------------

def _as_paths(true_path, est_path) -> tuple[np.ndarray, np.ndarray]:
    t = np.array([p.as_array() if isinstance(p, Pose) else p for p in true_path], dtype=float).reshape(-1, 3)
    e = np.array([p.as_array() if isinstance(p, Pose) else p for p in est_path], dtype=float).reshape(-1, 3)
    if t.shape != e.shape:
        raise ValueError(f"path length mismatch: {len(t)} vs {len(e)}")
    if len(t) == 0:
        raise ValueError("empty path")
    return t, e


def pose_rmse(true_path, est_path) -> tuple[float, float]:
    """Position and heading RMSE between two equally long pose sequences."""
    t, e = _as_paths(true_path, est_path)
    d = e - t
    pos = math.sqrt(float(np.mean(d[:, 0] ** 2 + d[:, 1] ** 2)))
    head = math.sqrt(float(np.mean(wrap_angle(d[:, 2]) ** 2)))
    return pos, head


def coverage_by_component(true_path, est_path, var_path) -> np.ndarray:
    """Per-component fraction of timesteps whose error lies inside the 2-sigma band."""
    t, e = _as_paths(true_path, est_path)
    v = np.asarray(var_path, dtype=float)
    if v.ndim == 3:
        v = np.diagonal(v, axis1=1, axis2=2)
    if v.shape != t.shape:
        raise ValueError("variance path does not match pose path")
    d = e - t
    d[:, 2] = wrap_angle(d[:, 2])
    return np.mean(np.abs(d) <= 2.0 * np.sqrt(v), axis=0)


def two_sigma_coverage(true_path, est_path, var_path, joint: bool = False) -> float:
    """Mean per-component 2-sigma coverage, or with ``joint`` the fraction where all three hold."""
    if not joint:
        return float(np.mean(coverage_by_component(true_path, est_path, var_path)))
    t, e = _as_paths(true_path, est_path)
    v = np.asarray(var_path, dtype=float)
    if v.ndim == 3:
        v = np.diagonal(v, axis1=1, axis2=2)
    d = e - t
    d[:, 2] = wrap_angle(d[:, 2])
    return float(np.mean(np.all(np.abs(d) <= 2.0 * np.sqrt(v), axis=1)))


# -- single run --------------------------------------------------------------

@dataclass(frozen=True)
class RunSummary:
    pos_rmse: float
    heading_rmse: float
    two_sigma_coverage: float
    diverged: bool
    final_r: tuple[float, float]
    final_pos_error: float = float("nan")
    epochs: int = 0
    degenerate_epochs: int = 0


@dataclass
class RunResult:
    index: int
    seed: int
    rows: list[tuple] = field(default_factory=list)
    summary: RunSummary | None = None
    error: str | None = None


def _route_steps(sc) -> int:
    pts = np.vstack([[0.0, 0.0], sc.waypoints])
    length = float(np.sum(np.hypot(*np.diff(pts, axis=0).T))) * sc.loops
    return int(10 * length / (sc.commanded_speed * sc.vehicle.dt_control)) + 1000


def simulate(cfg: ExperimentConfig, index: int) -> RunResult:
    """Run one seeded simulation; exceptions are captured in :attr:`RunResult.error`."""
    seed = cfg.base_seed + index
    result = RunResult(index, seed)
    try:
        _simulate(cfg, seed, result)
    except Exception as exc:  # recorded, the remaining runs continue
        log.warning("run %d (seed %d) failed: %s", index, seed, exc)
        result.error = f"{type(exc).__name__}: {exc}"
    return result


def _simulate(cfg: ExperimentConfig, seed: int, result: RunResult) -> None:
    sc = load_scenario(cfg.scenario_path)
    if cfg.truth_noise is not None:
        sc = sc.with_noise(cfg.truth_noise)
    fnoise = cfg.filter_noise or sc.noise
    fcfg = replace(cfg.filter, r_initial=fnoise.r_mat)
    truth_rng = np.random.default_rng([seed, 0])
    filt_rng = np.random.default_rng([seed, 1])

    sim = SimState()
    state = FilterState.initial(fcfg, sim.true_pose)
    period = sc.vehicle.obs_period_steps
    dt = sc.vehicle.dt_control
    max_steps = _route_steps(sc)

    true_path, est_path, var_path = [], [], []
    degenerate = 0
    while True:
        u, sim = control_step(sim, sc)
        if sim.terminal(sc):
            break
        if sim.step >= max_steps:
            raise RuntimeError(f"route not finished after {max_steps} steps")
        sim = advance_truth(sim, u, sc, truth_rng)
        obs = sense(sim, sc, truth_rng) if sim.step % period == 0 else None
        state = step(state, u, obs, fcfg, fnoise, sc.vehicle, filt_rng)
        if obs is None:
            continue
        est, _ = estimate(state)
        info = state.info
        degenerate += info.degenerate
        r = state.current_r(fcfg)
        tp = sim.true_pose
        err_pos = math.hypot(est.x - tp.x, est.y - tp.y)
        err_phi = wrap_angle(est.phi - tp.phi)
        result.rows.append((sim.step * dt, tp.x, tp.y, tp.phi, est.x, est.y, est.phi, err_pos, err_phi,
                            info.neff, int(info.resampled), float(r[0, 0]), float(r[1, 1]),
                            info.pso_iters, info.gbest_fitness))
        true_path.append(tp.as_array())
        est_path.append(est.as_array())
        var_path.append(pose_variance(state, est))

    if not true_path:
        raise RuntimeError("no observation epochs")
    pos, head = pose_rmse(true_path, est_path)
    final_err = result.rows[-1][7]
    r = state.current_r(fcfg)
    result.summary = RunSummary(
        pos_rmse=pos,
        heading_rmse=head,
        two_sigma_coverage=two_sigma_coverage(true_path, est_path, var_path),
        diverged=bool(final_err > cfg.divergence_threshold),
        final_r=(float(r[0, 0]), float(r[1, 1])),
        final_pos_error=final_err,
        epochs=len(true_path),
        degenerate_epochs=degenerate,
    )


# -- Monte Carlo ---------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def write_run_csv(path: Path, rows: Sequence[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _mean(xs) -> float:
    return float(np.mean(xs)) if len(xs) else float("nan")


def aggregate(results: Sequence[RunResult]) -> dict:
    ok = [r for r in results if r.summary is not None]
    pos = [r.summary.pos_rmse for r in ok]
    return {
        "runs": len(results),
        "failed_runs": len(results) - len(ok),
        "mean_pos_rmse": _mean(pos),
        "std_pos_rmse": float(np.std(pos, ddof=1)) if len(pos) > 1 else 0.0,
        "mean_heading_rmse": _mean([r.summary.heading_rmse for r in ok]),
        "divergence_rate": _mean([float(r.summary.diverged) for r in ok]),
        "mean_2sigma_coverage": _mean([r.summary.two_sigma_coverage for r in ok]),
        "mean_final_r_range": _mean([r.summary.final_r[0] for r in ok]),
        "mean_final_r_bearing": _mean([r.summary.final_r[1] for r in ok]),
        "per_run": [
            {"index": r.index, "seed": r.seed, "error": r.error,
             **({} if r.summary is None else asdict(r.summary))}
            for r in results
        ],
    }


def _simulate_star(args):
    return simulate(*args)


def run_monte_carlo(cfg: ExperimentConfig) -> dict:
    """Execute ``cfg.runs`` seeded runs, write per-run CSVs and ``summary.json``, return the summary."""
    start = time.perf_counter()
    jobs = [(cfg, i) for i in range(cfg.runs)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_simulate_star, jobs))
    else:
        results = [simulate(c, i) for c, i in jobs]

    summary = {
        "variant": cfg.filter.variant,
        "particles": cfg.filter.num_particles,
        "base_seed": cfg.base_seed,
        **aggregate(results),
        "wall_time_s": time.perf_counter() - start,
    }
    if cfg.output_dir is not None:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        for r in results:
            if r.summary is not None:
                write_run_csv(out / f"run_{r.index:03d}.csv", r.rows)
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def compare(cfg: ExperimentConfig, variants: Sequence[str]) -> dict:
    """Run several variants on identical seeds and report paired position-RMSE statistics."""
    from scipy import stats

    summaries = {}
    for v in variants:
        out = None if cfg.output_dir is None else str(Path(cfg.output_dir) / v)
        summaries[v] = run_monte_carlo(cfg.with_overrides(variant=v, output_dir=out))
    paired = {}
    base = variants[0]
    for v in variants[1:]:
        a = {p["index"]: p.get("pos_rmse") for p in summaries[base]["per_run"] if p["error"] is None}
        b = {p["index"]: p.get("pos_rmse") for p in summaries[v]["per_run"] if p["error"] is None}
        idx = sorted(set(a) & set(b))
        diff = np.array([b[i] - a[i] for i in idx])
        entry = {"n": len(idx), "mean_diff_pos_rmse": _mean(diff)}
        if len(idx) > 1 and np.any(diff != 0):
            entry["p_value_less"] = float(stats.ttest_rel([b[i] for i in idx], [a[i] for i in idx],
                                                          alternative="less").pvalue)
        paired[f"{v}_vs_{base}"] = entry
    result = {"variants": {v: {k: s[k] for k in s if k != "per_run"} for v, s in summaries.items()},
              "paired": paired}
    if cfg.output_dir is not None:
        Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
        (Path(cfg.output_dir) / "compare.json").write_text(json.dumps(result, indent=2) + "\n")
    return result
