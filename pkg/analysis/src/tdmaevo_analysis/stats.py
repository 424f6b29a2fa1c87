"""Pairwise two-sided rank-sum comparisons of used-slot ratios.

Each algorithm column contributes the solved runs of its best mutation
rate (the same selection the comparison table uses).  Small tie-free
samples get the exact null distribution; everything else falls back to the
tie-corrected normal approximation.
"""

from __future__ import annotations

from scipy.stats import mannwhitneyu

from .io import ResultRow, cells, initial_rows
from .tables import best_of_mr

_EXACT_LIMIT = 25


def rank_sum_p(a: list[float], b: list[float]) -> float:
    if len(set(a) | set(b)) == 1:
        return 1.0   # every pooled value tied: no evidence either way
    has_ties = len(set(a) | set(b)) < len(a) + len(b)
    method = "exact" if not has_ties and max(len(a), len(b)) <= _EXACT_LIMIT else "asymptotic"
    return float(mannwhitneyu(a, b, alternative="two-sided", method=method).pvalue)


def wilcoxon_pairwise(
    rows: list[ResultRow], alpha: float = 0.05
) -> dict[str, dict[tuple[str, str], float | None]]:
    """{experiment: {(column_a, column_b): p or None}} for a < b pairs.

    None marks pairs where either side has fewer than two solved runs.
    """
    samples: dict[str, dict[str, list[float]]] = {}
    for (experiment, column), runs_by_mr in cells(initial_rows(rows)).items():
        best = best_of_mr(runs_by_mr)
        if best is not None:
            samples.setdefault(experiment, {})[column] = best[2]

    out: dict[str, dict[tuple[str, str], float | None]] = {}
    for experiment, per_col in samples.items():
        names = sorted(per_col)
        matrix: dict[tuple[str, str], float | None] = {}
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                xa, xb = per_col[a], per_col[b]
                matrix[(a, b)] = rank_sum_p(xa, xb) if len(xa) >= 2 and len(xb) >= 2 else None
        out[experiment] = matrix
    return out


def significance_marker(p: float | None, alpha: float = 0.05) -> str:
    """Paper convention: '=' when not significant, blank otherwise."""
    if p is None:
        return ""
    return "=" if p > alpha else ""


def matrix_sidecar_rows(matrices, alpha: float = 0.05) -> list[dict]:
    rows = []
    for experiment in sorted(matrices):
        for (a, b), p in sorted(matrices[experiment].items()):
            rows.append({
                "experiment": experiment,
                "column_a": a,
                "column_b": b,
                "p_value": "" if p is None else repr(p),
                "marker": significance_marker(p, alpha),
            })
    return rows
