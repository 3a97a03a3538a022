"""Rudder-doublet rollouts under randomized aircraft parameters.

Simulates the nominal closed-loop aircraft plus a handful of perturbed
draws, and plots the six outputs with the |Ny| safety band.  Unsafe draws
cross the red lines; the dashed marker shows the first crossing.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from aeromon import ExperimentConfig, sample_params, simulate_rollout
from aeromon.plant import plant_from_config

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

config = ExperimentConfig()
plant = config.plant
nominal, gains, script = plant_from_config(plant)

fig, axes = plt.subplots(3, 2, figsize=(10, 7), sharex=True)
labels = ["sideslip [rad]", "roll rate [rad/s]", "yaw rate [rad/s]",
          "Ny [g]", "aileron [rad]", "rudder [rad]"]

for seed in range(8):
    params = sample_params(nominal, plant.perturbation, seed)
    traj = simulate_rollout(params, gains, script, plant.horizon, plant.dt,
                            limit=plant.ny_limit)
    t = traj.times()
    style = dict(color="tab:red", alpha=0.8) if traj.is_unsafe else dict(color="tab:blue", alpha=0.5)
    for k, ax in enumerate(axes.flat):
        ax.plot(t, traj.outputs[:, k], lw=1, **style)
        if traj.is_unsafe and k == 3:
            ax.axvline(traj.failure_index * plant.dt, ls="--", lw=0.8, color="k", alpha=0.4)
    print(f"seed {seed}: {'UNSAFE at t=%.2f s' % (traj.failure_index * plant.dt) if traj.is_unsafe else 'safe'}"
          f"  (peak |Ny| = {np.abs(traj.outputs[:, 3]).max():.3f} g)")

for k, ax in enumerate(axes.flat):
    ax.set_ylabel(labels[k])
    ax.grid(alpha=0.3)
axes.flat[3].axhline(plant.ny_limit, color="red", lw=1)
axes.flat[3].axhline(-plant.ny_limit, color="red", lw=1)
for ax in axes[-1]:
    ax.set_xlabel("time [s]")
fig.suptitle("Rudder doublet under parameter uncertainty (red = unsafe draw)")
fig.tight_layout()
fig.savefig(OUT / "doublet_rollouts.png", dpi=130)
print(f"wrote {OUT / 'doublet_rollouts.png'}")
