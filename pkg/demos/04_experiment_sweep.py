"""Reduced experiment sweep: miss rate and classification power vs epsilon.

Runs a 3-fit sweep of all five monitor constructions on a shared test pool
and renders the two result panels.  The full-scale version (10 fits x 500
trajectories) is what the acceptance suite checks; this one finishes in
about a minute.
"""

from pathlib import Path

from aeromon import ExperimentConfig
from aeromon.harness import run_experiment
from aeromon.plots import plot_results

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

config = ExperimentConfig()
config.fits = 3
config.test_trajectories = 150
config.validate()

result = run_experiment(config, output_dir=OUT / "sweep")
print(f"{'method':>11s} {'eps':>5s} {'miss':>6s} {'power':>6s}   (miss bound = eps)")
for entry in result.summary:
    print(f"{entry['method']:>11s} {entry['epsilon']:>5g} "
          f"{entry['mean_miss_rate']:>6.3f} {entry['mean_power']:>6.3f}")

for path in plot_results(OUT / "sweep" / "results.csv", OUT / "sweep"):
    print(f"wrote {path}")
