"""Experiment driver: dataset fits, monitor evaluation, and result tables.

A miss is an unsafe test trajectory with no alert at any full-buffer step up
to lead_steps before failure; power is the fraction of safe test
trajectories that never alert.  Every epsilon on the grid is evaluated from
one shared p-value sequence per trajectory, so per-fit miss rate and power
are nondecreasing in epsilon by construction.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .baselines import MethodSpec, build_monitor
from .config import ExperimentConfig, config_to_dict, derive_seed
from .conformal import CalibratedMonitor, trajectory_p_values
from .datasets import DatasetBundle, collect_dataset
from .plant import Trajectory, plant_from_config, sample_params, simulate_rollout
from .predictor import LinearPredictor, fit_least_squares

# Seed stream tags disjoint from the collector's (it uses 0 and 1).
_TEST_STREAM = 2
_FIT_STREAM = 3
_HEALTH_STREAM = 0  # health previews the collection stream on purpose


@dataclass(frozen=True)
class ResultRow:
    """Miss rate and classification power for one (method, fit, epsilon)."""

    method: str
    fit_index: int
    epsilon: float
    miss_rate: float
    power: float
    unsafe_count: int
    safe_count: int


RESULT_COLUMNS = ["method", "fit_index", "epsilon", "miss_rate", "power",
                  "unsafe_count", "safe_count"]


def generate_test_pool(config: ExperimentConfig, master_seed: int,
                       count: int | None = None) -> list[Trajectory]:
    """Fresh trajectories whose seeds are disjoint from every training stream."""
    nominal, gains, script = plant_from_config(config.plant)
    n = config.test_trajectories if count is None else count
    pool = []
    for i in range(n):
        seed = derive_seed(master_seed, _TEST_STREAM, i)
        params = sample_params(nominal, config.plant.perturbation, seed)
        pool.append(simulate_rollout(params, gains, script, config.plant.horizon,
                                     config.plant.dt, limit=config.plant.ny_limit,
                                     substeps=config.plant.rk4_substeps, seed=seed))
    return pool


def evaluate_monitor(monitor: CalibratedMonitor, trajectories: list[Trajectory],
                     epsilon_grid: list[float], fit_index: int = 0
                     ) -> tuple[list[ResultRow], dict]:
    """Score every trajectory once and read all epsilon thresholds off it.

    Returns the result rows plus evaluation metadata (excluded-trajectory
    count for unsafe runs too short to monitor).
    """
    if not epsilon_grid or any(not (0.0 < e < 1.0) for e in epsilon_grid):
        raise ValueError("epsilon_grid values must lie strictly in (0, 1)")
    past = monitor.past_steps
    lead = int(monitor.metadata["lead_steps"])
    unsafe_peaks = []   # max p over the preemptive window of each unsafe trajectory
    safe_peaks = []     # max p over the whole horizon of each safe trajectory
    excluded = 0
    for traj in trajectories:
        p_seq = trajectory_p_values(monitor, traj.outputs)
        if traj.is_unsafe:
            last_step = traj.failure_index - lead
            if last_step < past or p_seq.size == 0:
                excluded += 1
                continue
            unsafe_peaks.append(p_seq[: last_step - past + 1].max())
        else:
            if p_seq.size == 0:
                excluded += 1
                continue
            safe_peaks.append(p_seq.max())
    unsafe_peaks = np.asarray(unsafe_peaks)
    safe_peaks = np.asarray(safe_peaks)
    rows = []
    for eps in epsilon_grid:
        # Alert in window <=> peak p >= epsilon.
        miss = float(np.mean(unsafe_peaks < eps)) if unsafe_peaks.size else 0.0
        power = float(np.mean(safe_peaks < eps)) if safe_peaks.size else 0.0
        rows.append(ResultRow(method=monitor.method, fit_index=fit_index,
                              epsilon=float(eps), miss_rate=miss, power=power,
                              unsafe_count=int(unsafe_peaks.size),
                              safe_count=int(safe_peaks.size)))
    return rows, {"excluded": excluded,
                  "unsafe_peaks": unsafe_peaks, "safe_peaks": safe_peaks}


@dataclass
class ExperimentResult:
    rows: list[ResultRow]
    summary: list[dict]
    config: ExperimentConfig


def run_fit(config: ExperimentConfig, fit_index: int
            ) -> tuple[DatasetBundle, LinearPredictor, dict[str, CalibratedMonitor]]:
    """Collect one dataset, fit the predictor, and build all requested monitors."""
    fit_seed = derive_seed(config.master_seed, _FIT_STREAM, fit_index)
    bundle = collect_dataset(config, config.n_unsafe, fit_seed)
    predictor = fit_least_squares(bundle.safe_matrix(), bundle.regression_targets)
    monitors = {}
    for name in config.methods:
        spec = MethodSpec(name=name, pca_dims=config.pca_dims)
        monitors[name] = build_monitor(spec, bundle, predictor)
    return bundle, predictor, monitors


def run_experiment(config: ExperimentConfig, output_dir: str | Path | None = None
                   ) -> ExperimentResult:
    """Full sweep: per-fit collection, training, shared-pool evaluation.

    Deterministic given config.master_seed; writes results.csv and
    summary.json when output_dir is given.
    """
    config.validate()
    pool = generate_test_pool(config, config.master_seed)
    rows: list[ResultRow] = []
    for f in range(config.fits):
        _, _, monitors = run_fit(config, f)
        for name in config.methods:
            fit_rows, _ = evaluate_monitor(monitors[name], pool,
                                           config.epsilon_grid, fit_index=f)
            rows.extend(fit_rows)
    rows.sort(key=lambda r: (r.method, r.fit_index, r.epsilon))
    summary = summarize(rows)
    result = ExperimentResult(rows=rows, summary=summary, config=config)
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_results_csv(rows, out / "results.csv")
        write_summary_json(result, out / "summary.json")
    return result


def summarize(rows: list[ResultRow]) -> list[dict]:
    """Mean miss rate and power over fits for each (method, epsilon)."""
    keys = sorted({(r.method, r.epsilon) for r in rows})
    summary = []
    for method, eps in keys:
        group = [r for r in rows if r.method == method and r.epsilon == eps]
        summary.append({
            "method": method,
            "epsilon": eps,
            "fits": len(group),
            "mean_miss_rate": float(np.mean([r.miss_rate for r in group])),
            "mean_power": float(np.mean([r.power for r in group])),
            "unsafe_total": int(sum(r.unsafe_count for r in group)),
            "safe_total": int(sum(r.safe_count for r in group)),
        })
    return summary


def _format_cell(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def results_csv_text(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for r in rows:
        d = asdict(r)
        writer.writerow([_format_cell(d[c]) for c in RESULT_COLUMNS])
    return buf.getvalue()


def write_results_csv(rows: list[ResultRow], path: str | Path) -> None:
    Path(path).write_text(results_csv_text(rows))


def read_results_csv(path: str | Path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for rec in reader:
            rows.append(ResultRow(
                method=rec["method"], fit_index=int(rec["fit_index"]),
                epsilon=float(rec["epsilon"]), miss_rate=float(rec["miss_rate"]),
                power=float(rec["power"]), unsafe_count=int(rec["unsafe_count"]),
                safe_count=int(rec["safe_count"]),
            ))
    return rows


def write_summary_json(result: ExperimentResult, path: str | Path) -> None:
    doc = {
        "config": config_to_dict(result.config),
        "summary": result.summary,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def scenario_health(config: ExperimentConfig, sample_size: int = 1000,
                    seed: int | None = None) -> dict:
    """Preview the collection stream: unsafe fraction and failure timing.

    Warns when the unsafe fraction leaves [0.1, 0.4] — the regime where
    collection is neither starved nor dominated by failures.
    """
    if sample_size < 100:
        raise ValueError("sample_size must be >= 100")
    master = config.master_seed if seed is None else seed
    nominal, gains, script = plant_from_config(config.plant)
    mon = config.monitoring
    n_unsafe = 0
    n_too_early = 0
    failure_times = []
    for i in range(sample_size):
        s = derive_seed(master, _HEALTH_STREAM, i)
        params = sample_params(nominal, config.plant.perturbation, s)
        traj = simulate_rollout(params, gains, script, config.plant.horizon,
                                config.plant.dt, limit=config.plant.ny_limit,
                                substeps=config.plant.rk4_substeps, seed=s)
        if traj.is_unsafe:
            n_unsafe += 1
            failure_times.append(traj.failure_index * config.plant.dt)
            if traj.failure_index - mon.lead_steps < mon.past_steps:
                n_too_early += 1
    unsafe_fraction = n_unsafe / sample_size
    warnings = []
    if not 0.1 <= unsafe_fraction <= 0.4:
        warnings.append(
            f"unsafe fraction {unsafe_fraction:.3f} outside [0.1, 0.4]; "
            "retune perturbation or the safety limit"
        )
    return {
        "sample_size": sample_size,
        "unsafe_fraction": unsafe_fraction,
        "mean_failure_time_s": float(np.mean(failure_times)) if failure_times else None,
        "too_early_fraction": (n_too_early / n_unsafe) if n_unsafe else 0.0,
        "warnings": warnings,
    }
