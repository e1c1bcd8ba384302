"""Figure rendering for optimization and comparison reports.

Figures are written next to the delimited outputs; PNG metadata is stripped
so repeated runs produce identical bytes.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .qd import Archive
from .sim import ComparisonReport
from .workspace import Workspace

_PNG_METADATA = {"Software": None}


def render_heatmap(archive: Archive, path) -> None:
    """Feature-bin grid colored by user-facing legibility score."""
    shape = archive.descriptor.shape()
    grid = np.full(shape, np.nan)
    for (i, j), cell in archive.cells.items():
        grid[i, j] = cell.legibility
    fig, ax = plt.subplots(figsize=(10, 3.2))
    masked = np.ma.masked_invalid(grid)
    im = ax.imshow(
        masked,
        aspect="auto",
        origin="lower",
        interpolation="nearest",
        cmap="viridis",
    )
    ax.set_xlabel("item ordering rank bin")
    ax.set_ylabel("min item distance bin")
    ax.set_title(f"archive ({len(archive)} elites)")
    fig.colorbar(im, ax=ax, label="legibility")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def render_comparison(report: ComparisonReport, path) -> None:
    """Grouped bar chart of baseline vs optimized metrics with stddev bars."""
    metrics = [m for m in report.metrics]
    labels = [m.name.replace("_", " ") for m in metrics]
    base = [0.0 if math.isinf(m.baseline_mean) else m.baseline_mean for m in metrics]
    opti = [0.0 if math.isinf(m.optimized_mean) else m.optimized_mean for m in metrics]
    base_err = [m.baseline_std for m in metrics]
    opti_err = [m.optimized_std for m in metrics]
    x = np.arange(len(metrics))
    width = 0.38
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(x - width / 2, base, width, yerr=base_err, capsize=3, label="baseline")
    ax.bar(x + width / 2, opti, width, yerr=opti_err, capsize=3, label="optimized")
    ax.set_xticks(x)
    ax.set_xticklabels(labels)
    ax.set_ylabel("mean over seeds")
    ax.set_title(f"paired comparison over {report.n_seeds} seeds")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def render_workspace(ws: Workspace, path, title: str = "") -> None:
    """Top-down view: items as labeled discs, obstacles as filled polygons."""
    (xmin, ymin), (xmax, ymax) = ws.bounds
    fig, ax = plt.subplots(figsize=(6, 6 * (ymax - ymin) / (xmax - xmin)))
    ax.add_patch(
        plt.Rectangle(
            (xmin, ymin), xmax - xmin, ymax - ymin, fill=False, edgecolor="black"
        )
    )
    for poly in ws.fixed_obstacles:
        ax.add_patch(plt.Polygon(list(poly.vertices), facecolor="0.6", edgecolor="0.3"))
    for poly in ws.virtual_obstacles:
        ax.add_patch(
            plt.Polygon(
                list(poly.vertices), facecolor="cyan", edgecolor="red", alpha=0.7
            )
        )
    for it in ws.items:
        ax.add_patch(plt.Circle(it.pos, it.radius, facecolor="tab:orange"))
        ax.annotate(it.id, it.pos, fontsize=7, ha="center", va="bottom")
    ax.plot([ws.start[0]], [ws.start[1]], marker="*", markersize=12, color="green")
    ax.set_xlim(xmin - 0.02 * (xmax - xmin), xmax + 0.02 * (xmax - xmin))
    ax.set_ylim(ymin - 0.02 * (ymax - ymin), ymax + 0.02 * (ymax - ymin))
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)
