"""Render the miss-rate and classification-power panels from a results table."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .harness import ResultRow, read_results_csv, summarize

METHOD_LABELS = {
    "full": "Predicted NN (full)",
    "no_pred": "No prediction",
    "pca": "PCA",
    "current_ny": "Current |Ny|",
    "pred_ny": "Predicted |Ny|",
}


def _panel_data(rows: list[ResultRow], key: str) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    curves: dict[str, list[tuple[float, float]]] = {}
    for entry in summarize(rows):
        curves.setdefault(entry["method"], []).append((entry["epsilon"], entry[key]))
    out = {}
    for method, pts in curves.items():
        arr = np.asarray(sorted(pts))
        out[method] = (arr[:, 0], arr[:, 1])
    return out


def plot_results(results_csv: str | Path, output_dir: str | Path,
                 fmt: str = "svg") -> list[Path]:
    """Write miss_rate.<fmt> and power.<fmt>; returns the created paths."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_results_csv(results_csv)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    created = []

    panels = [
        ("mean_miss_rate", "Empirical miss rate", "miss_rate"),
        ("mean_power", "Classification power", "power"),
    ]
    for key, ylabel, stem in panels:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for method, (eps, vals) in sorted(_panel_data(rows, key).items()):
            ax.plot(eps, vals, marker="o",
                    label=METHOD_LABELS.get(method, method))
        if key == "mean_miss_rate":
            grid = sorted({r.epsilon for r in rows})
            ax.plot(grid, grid, "k--", linewidth=1, label="bound $\\epsilon$")
        ax.set_xlabel("target miss rate $\\epsilon$")
        ax.set_ylabel(ylabel)
        ax.set_ylim(-0.02, 1.02)
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        path = out / f"{stem}.{fmt}"
        fig.savefig(path)
        plt.close(fig)
        created.append(path)
    return created
