"""A calibrated monitor's p-value trace on a safe and an unsafe trajectory.

Trains the full monitor (predictor + nearest-neighbor score + leave-one-out
conformal calibration) and plots Ny together with the p-value over time.
On the unsafe run the p-value climbs ahead of the violation; on the safe
run it stays at the floor 1/(N+1).
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from aeromon import (
    ExperimentConfig,
    MethodSpec,
    build_monitor,
    collect_dataset,
    fit_least_squares,
    trajectory_p_values,
)
from aeromon.harness import generate_test_pool

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

EPSILON = 0.1

config = ExperimentConfig()
bundle = collect_dataset(config, config.n_unsafe, master_seed=0)
model = fit_least_squares(bundle.safe_matrix(), bundle.regression_targets)
monitor = build_monitor(MethodSpec(name="full"), bundle, model)
print(f"calibrated on N={monitor.n_calibration} unsafe observations; "
      f"p-value floor = {1 / (monitor.n_calibration + 1):.4f}")

pool = generate_test_pool(config, config.master_seed, count=120)
unsafe = next(t for t in pool if t.is_unsafe)
# A comfortably safe run; near-limit safe runs legitimately draw alerts.
safe = min((t for t in pool if not t.is_unsafe),
           key=lambda t: trajectory_p_values(monitor, t.outputs).max())

fig, axes = plt.subplots(2, 2, figsize=(11, 6), sharex="col")
for col, (traj, title) in enumerate([(unsafe, "unsafe trajectory"),
                                     (safe, "safe trajectory")]):
    p_seq = trajectory_p_values(monitor, traj.outputs)
    steps = np.arange(monitor.past_steps, len(traj))
    axes[0, col].plot(traj.times(), traj.outputs[:, 3], lw=1.2)
    axes[0, col].axhline(0.5, color="red", lw=1)
    axes[0, col].axhline(-0.5, color="red", lw=1)
    axes[0, col].set_title(title)
    axes[0, col].set_ylabel("Ny [g]")
    axes[1, col].plot(steps * traj.dt, p_seq, lw=1.2, color="tab:purple")
    axes[1, col].axhline(EPSILON, color="k", ls=":", label=f"epsilon = {EPSILON}")
    axes[1, col].set_ylabel("conformal p-value")
    axes[1, col].set_xlabel("time [s]")
    axes[1, col].set_ylim(0, 1.02)
    if traj.is_unsafe:
        t_fail = traj.failure_index * traj.dt
        lead = bundle.metadata["lead_steps"] * traj.dt
        for ax in axes[:, col]:
            ax.axvline(t_fail, color="k", ls="--", lw=1)
            ax.axvline(t_fail - lead, color="tab:blue", ls="--", lw=1)
        alert_steps = steps[p_seq >= EPSILON]
        first_alert = alert_steps[0] * traj.dt if alert_steps.size else None
        print(f"unsafe run: violation at {t_fail:.2f} s, "
              f"first alert at {first_alert:.2f} s "
              f"(lead needed: alert before {t_fail - lead:.2f} s)")
    else:
        print(f"safe run: max p-value {p_seq.max():.4f}, no alert at epsilon {EPSILON}: "
              f"{bool((p_seq < EPSILON).all())}")
    for ax in axes[:, col]:
        ax.grid(alpha=0.3)
axes[1, 0].legend(fontsize=8)
fig.tight_layout()
fig.savefig(OUT / "pvalue_traces.png", dpi=130)
print(f"wrote {OUT / 'pvalue_traces.png'}")
