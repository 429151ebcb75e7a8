"""Line charts for experiment histories, written as SVG files."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "figure.figsize": (4.8, 3.2),
    # plain text in the SVG keeps output byte-stable across runs
    "svg.fonttype": "none",
    "svg.hashsalt": "riemfed",
}

LABELS = {
    "grad_norm": "global Riemannian gradient norm",
    "loss": "loss f(x_t)",
    "loss_gap": "loss gap f(x_t) - f*",
    "principal_angle_sum": "sum of principal angles (rad)",
}

COLORS = {"rfedsvrg": "tab:red", "rfedavg": "tab:blue", "rfedprox": "tab:green"}


def line_chart(
    path: Path | str,
    series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
    ylabel: str,
    xlabel: str = "communication round",
    logy: bool = True,
    title: str | None = None,
) -> Path:
    """Draw one line per entry of ``series`` and save to ``path``.

    Non-positive values are dropped from log-scale plots.
    """
    path = Path(path)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, (x, y) in series.items():
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            keep = np.isfinite(y) & ((y > 0) if logy else True)
            ax.plot(x[keep], y[keep], label=label, color=COLORS.get(label))
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path


def metric_charts(out_dir: Path, rounds, columns: Mapping[str, Mapping[str, Sequence[float]]], prefix: str = "") -> list[Path]:
    """One chart per metric; ``columns[metric][label]`` holds that label's curve."""
    paths = []
    for metric, curves in columns.items():
        series = {label: (rounds, y) for label, y in curves.items()}
        if not any(np.any(np.asarray(y, dtype=float) > 0) for _, y in series.values()):
            continue
        paths.append(line_chart(out_dir / f"{prefix}{metric}.svg", series, LABELS.get(metric, metric)))
    return paths
