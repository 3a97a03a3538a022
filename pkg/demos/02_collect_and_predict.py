"""Dataset collection and the 0.25-second-ahead linear predictor.

Collects rollouts until N unsafe trajectories are found, fits the affine
least-squares map from the 3-frame observation buffer to the output five
steps ahead, and overlays predicted vs. true outputs on a fresh trajectory.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from aeromon import ExperimentConfig, collect_dataset, fit_least_squares, transform_set
from aeromon.harness import generate_test_pool

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

config = ExperimentConfig()
config.n_unsafe = 20  # small demo; the experiments use 50

bundle = collect_dataset(config, config.n_unsafe, master_seed=7)
meta = bundle.metadata
print(f"collected {meta['n_unsafe']} unsafe / {meta['n_safe_trajectories']} safe trajectories "
      f"in {meta['n_rollouts']} rollouts")

model = fit_least_squares(bundle.safe_matrix(), bundle.regression_targets)
print("per-output RMS residual:", np.array2string(model.rms_residual, precision=4))

# Fresh trajectory: stack observations at every step and predict ahead.
traj = generate_test_pool(config, master_seed=7, count=1)[0]
past, lead = meta["past_steps"], meta["lead_steps"]
windows = np.stack([traj.outputs[i - past: i + 1].reshape(-1)
                    for i in range(past, len(traj) - lead)])
predicted = transform_set(model, windows)
target_times = (np.arange(past, len(traj) - lead) + lead) * traj.dt

fig, axes = plt.subplots(2, 2, figsize=(10, 6), sharex=True)
for ax, k, label in zip(axes.flat, [0, 1, 2, 3],
                        ["sideslip", "roll rate", "yaw rate", "Ny"]):
    ax.plot(traj.times(), traj.outputs[:, k], label="true", lw=1.2)
    ax.plot(target_times, predicted[:, k], "--", label="predicted 0.25 s earlier", lw=1.2)
    ax.set_title(label)
    ax.grid(alpha=0.3)
axes.flat[0].legend(fontsize=8)
for ax in axes[-1]:
    ax.set_xlabel("time [s]")
fig.tight_layout()
fig.savefig(OUT / "prediction_overlay.png", dpi=130)
print(f"wrote {OUT / 'prediction_overlay.png'}")
