"""Analysis entry point: tables, figures and statistics from a results file."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import figures, stats, tables
from .io import MissingColumns, read_results, write_csv


def main(argv=None) -> int:
    p = argparse.ArgumentParser(
        prog="tdmaevo-analysis",
        description="Render comparison tables, scatter plots, heatmaps and "
                    "pairwise rank-sum tests from a tdmaevo results.csv",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in [
        ("table3", _cmd_table3),
        ("scatter", _cmd_scatter),
        ("heatmap", _cmd_heatmap),
        ("wilcoxon", _cmd_wilcoxon),
    ]:
        c = sub.add_parser(name)
        c.add_argument("--input", required=True, help="results.csv path")
        c.add_argument("--outdir", default="analysis-out")
        if name == "wilcoxon":
            c.add_argument("--alpha", type=float, default=0.05)
        c.set_defaults(func=fn)
    args = p.parse_args(argv)
    try:
        return args.func(args)
    except (MissingColumns, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _outdir(args) -> Path:
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_table3(args) -> int:
    rows = read_results(args.input)
    table = tables.table3(rows)
    sys.stdout.write(tables.format_table3(table))
    out = _outdir(args)
    write_csv(out / "table3.csv",
              ("experiment", "column", "best_mr", "median_used_slots"),
              tables.table3_sidecar_rows(table))
    print(f"sidecar: {out / 'table3.csv'}")
    return 0


def _cmd_scatter(args) -> int:
    rows = read_results(args.input)
    for path in figures.scatter_resources_vs_slots(rows, _outdir(args)):
        print(path)
    return 0


def _cmd_heatmap(args) -> int:
    rows = read_results(args.input)
    for path in figures.heatmap_mr_by_rule(rows, _outdir(args)):
        print(path)
    return 0


def _cmd_wilcoxon(args) -> int:
    rows = read_results(args.input)
    matrices = stats.wilcoxon_pairwise(rows, args.alpha)
    out = _outdir(args)
    side = stats.matrix_sidecar_rows(matrices, args.alpha)
    write_csv(out / "wilcoxon.csv",
              ("experiment", "column_a", "column_b", "p_value", "marker"), side)
    for row in side:
        p_text = row["p_value"] or "insufficient"
        print(f"{row['experiment']}: {row['column_a']} vs {row['column_b']}: "
              f"p={p_text} {row['marker']}")
    print(f"sidecar: {out / 'wilcoxon.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
