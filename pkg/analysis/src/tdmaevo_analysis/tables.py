"""Comparison tables: median used slots per problem and algorithm column."""

from __future__ import annotations

import statistics

from .io import COLUMN_ORDER, ResultRow, cells, initial_rows


def best_of_mr(runs_by_mr: dict[float, list[ResultRow]]) -> tuple[float, float, list[float]] | None:
    """Lowest median used-slot ratio over solved runs across mutation rates.

    Mirrors the simulation package's aggregation: mutation rates are visited
    in ascending order and a cell wins only on a strictly lower median, so
    ties resolve to the lowest rate.  Returns (mr, median, solved values) or
    None when nothing solved.
    """
    best = None
    for mr in sorted(runs_by_mr):
        solved = [r.used_slots for r in runs_by_mr[mr] if r.solved]
        if not solved:
            continue
        med = float(statistics.median(solved))
        if best is None or med < best[1]:
            best = (mr, med, solved)
    return best


def table3(rows: list[ResultRow]) -> dict:
    """{experiment: {column: (best_mr, median) | None}} over initial-phase runs."""
    grouped = cells(initial_rows(rows))
    if not grouped:
        raise ValueError("no initial-phase rows to tabulate")
    out: dict[str, dict[str, tuple[float, float] | None]] = {}
    for (experiment, column), runs_by_mr in grouped.items():
        best = best_of_mr(runs_by_mr)
        out.setdefault(experiment, {})[column] = None if best is None else best[:2]
    return out


def table3_sidecar_rows(table: dict) -> list[dict]:
    rows = []
    for experiment in sorted(table):
        for column in _ordered(table[experiment]):
            entry = table[experiment][column]
            rows.append({
                "experiment": experiment,
                "column": column,
                "best_mr": "" if entry is None else repr(entry[0]),
                "median_used_slots": "-" if entry is None else repr(entry[1]),
            })
    return rows


def format_table3(table: dict) -> str:
    """One row per problem; per-row minima rendered in bold asterisks."""
    columns = sorted(
        {c for per in table.values() for c in per}, key=_column_key
    )
    lines = ["  ".join(["problem".ljust(14)] + [c.rjust(9) for c in columns])]
    for experiment in sorted(table):
        per = table[experiment]
        medians = [per[c][1] for c in columns if per.get(c) is not None]
        low = min(medians) if medians else None
        row = [experiment.ljust(14)]
        for c in columns:
            entry = per.get(c)
            if entry is None:
                row.append("-".rjust(9))
            else:
                text = f"{entry[1]:.2f}"
                if entry[1] == low:
                    text = f"*{text}*"
                row.append(text.rjust(9))
        lines.append("  ".join(row))
    return "\n".join(lines) + "\n"


def _ordered(per_column: dict) -> list[str]:
    return sorted(per_column, key=_column_key)


def _column_key(column: str) -> tuple[int, str]:
    try:
        return (COLUMN_ORDER.index(column), column)
    except ValueError:
        return (len(COLUMN_ORDER), column)
