"""Scatter and heatmap renderings with machine-readable sidecars.

Every figure writes a CSV holding exactly the numbers plotted; downstream
checks compare sidecars, never pixels.  Unsolved runs contribute to no
statistic here.
"""

from __future__ import annotations

import statistics
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import COLUMN_ORDER, ResultRow, cells, initial_rows, write_csv

SCATTER_COLUMNS = ("experiment", "column", "mr", "median_used_resources",
                   "median_used_slots", "n_solved")
HEATMAP_COLUMNS = ("experiment", "metric", "mr", "column", "mean_percent", "n_solved")

#: heatmap column layout: the two single-objective baselines then the rules
HEATMAP_ORDER = ("CHC", "CSA", "R1", "R2", "R3", "R4", "R5", "R6", "R7")


def scatter_points(rows: list[ResultRow]) -> list[dict]:
    """One point per (experiment, column, mr): median resources vs slots."""
    points = []
    for (experiment, column), runs_by_mr in sorted(cells(initial_rows(rows)).items()):
        for mr in sorted(runs_by_mr):
            solved = [r for r in runs_by_mr[mr] if r.solved]
            if not solved:
                continue
            points.append({
                "experiment": experiment,
                "column": column,
                "mr": repr(mr),
                "median_used_resources": repr(
                    float(statistics.median(r.used_resources for r in solved))
                ),
                "median_used_slots": repr(
                    float(statistics.median(r.used_slots for r in solved))
                ),
                "n_solved": str(len(solved)),
            })
    return points


def scatter_resources_vs_slots(rows: list[ResultRow], outdir) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    points = scatter_points(rows)
    written = []
    experiments = sorted({p["experiment"] for p in points}) or [""]
    markers = "osv^D*Pp<>Xh8"
    for experiment in experiments:
        mine = [p for p in points if p["experiment"] == experiment]
        fig, ax = plt.subplots(figsize=(5, 4))
        columns = sorted({p["column"] for p in mine}, key=_order_key)
        mrs = sorted({float(p["mr"]) for p in mine})
        cmap = plt.colormaps["viridis"]
        for ci, column in enumerate(columns):
            for p in mine:
                if p["column"] != column:
                    continue
                color = cmap(mrs.index(float(p["mr"])) / max(len(mrs) - 1, 1))
                ax.scatter(
                    float(p["median_used_resources"]), float(p["median_used_slots"]),
                    marker=markers[ci % len(markers)], color=color, s=45,
                    label=column,
                )
        handles, labels = ax.get_legend_handles_labels()
        seen = dict(zip(labels, handles))
        if seen:
            ax.legend(seen.values(), seen.keys(), fontsize=6, ncol=2)
        ax.set_xlabel("ratio of used resources")
        ax.set_ylabel("ratio of used slots")
        ax.set_title(experiment or "no data")
        name = experiment or "empty"
        fig_path = outdir / f"{name}_scatter.png"
        fig.savefig(fig_path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        sidecar = outdir / f"{name}_scatter.csv"
        write_csv(sidecar, SCATTER_COLUMNS, mine)
        written += [fig_path, sidecar]
    return written


def heatmap_values(rows: list[ResultRow]) -> list[dict]:
    """Mean percentages per (experiment, metric, mr, column) over solved runs."""
    values = []
    for (experiment, column), runs_by_mr in sorted(cells(initial_rows(rows)).items()):
        for mr in sorted(runs_by_mr):
            solved = [r for r in runs_by_mr[mr] if r.solved]
            for metric, pick in (
                ("used_resources", lambda r: r.used_resources),
                ("used_slots", lambda r: r.used_slots),
            ):
                mean = (
                    repr(float(100.0 * sum(map(pick, solved)) / len(solved)))
                    if solved
                    else ""
                )
                values.append({
                    "experiment": experiment,
                    "metric": metric,
                    "mr": repr(mr),
                    "column": column,
                    "mean_percent": mean,
                    "n_solved": str(len(solved)),
                })
    return values


def heatmap_mr_by_rule(rows: list[ResultRow], outdir) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    values = heatmap_values(rows)
    written = []
    for experiment in sorted({v["experiment"] for v in values}):
        for metric in ("used_resources", "used_slots"):
            mine = [
                v for v in values
                if v["experiment"] == experiment and v["metric"] == metric
            ]
            columns = sorted({v["column"] for v in mine}, key=_order_key)
            mrs = sorted({float(v["mr"]) for v in mine})
            grid = np.full((len(mrs), len(columns)), np.nan)
            for v in mine:
                if v["mean_percent"]:
                    grid[mrs.index(float(v["mr"])), columns.index(v["column"])] = float(
                        v["mean_percent"]
                    )
            fig, ax = plt.subplots(figsize=(1 + 0.6 * len(columns), 1 + 0.45 * len(mrs)))
            # darker = worse (higher percentage)
            im = ax.imshow(grid, cmap="Greys", aspect="auto", vmin=0, vmax=100)
            ax.set_xticks(range(len(columns)), columns, fontsize=7)
            ax.set_yticks(range(len(mrs)), [f"{m:g}" for m in mrs], fontsize=7)
            ax.set_ylabel("mutation rate")
            ax.set_title(f"{experiment}: % {metric.replace('_', ' ')}", fontsize=8)
            fig.colorbar(im, ax=ax, shrink=0.8)
            fig_path = outdir / f"{experiment}_heatmap_{metric}.png"
            fig.savefig(fig_path, dpi=150, bbox_inches="tight")
            plt.close(fig)
            sidecar = outdir / f"{experiment}_heatmap_{metric}.csv"
            write_csv(sidecar, HEATMAP_COLUMNS, mine)
            written += [fig_path, sidecar]
    return written


def _order_key(column: str) -> tuple[int, str]:
    order = HEATMAP_ORDER + tuple(c for c in COLUMN_ORDER if c not in HEATMAP_ORDER)
    try:
        return (order.index(column), column)
    except ValueError:
        return (len(order), column)
